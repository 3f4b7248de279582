"""Model state and scoring for the coupled classifier pair.

The generative half is a multivariate Bernoulli naive Bayes over binary
presence features,

    log p(y, x) = log pi_y + sum_d [x_d * t_yd - A(t_yd)],

held in natural form t = theta_tilde. The discriminative half is multiclass
logistic regression with weights w and intercepts b on the same features.
Both halves score a document in O(nnz): the dense absence term
-sum_d A(t_yd) is cached per class and present features contribute the
sparse correction t_yd on top.

The full training objective decomposes into four blocks, exposed separately
by log_joint_blocks for testing:

    prior           Gaussian log prior on w (uniform on b contributes 0)
    coupling        coupling prior linking theta_tilde to w, per coordinate
    discriminative  sum over labeled documents of log p(t | x, w, b)
    generative      sum over all documents of log sum_y p(y, x | pi, theta_tilde)

Labels enter only through the discriminative block; the generative block
always marginalizes the class.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import expfam
from .errors import ConfigError, DomainError, ParseError

_PI_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SparseBinaryVector:
    """Indices of present features; sorted, unique, all < num_features."""

    indices: np.ndarray
    num_features: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        object.__setattr__(self, "indices", idx)
        if self.num_features < 1:
            raise DomainError(f"num_features must be >= 1, got {self.num_features}")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.num_features:
                raise DomainError(
                    f"feature index out of range [0, {self.num_features}): "
                    f"{idx[idx.argmin()] if idx[0] < 0 else idx[-1]}")
            if np.any(np.diff(idx) <= 0):
                raise DomainError("feature indices must be strictly increasing")

    def __len__(self):
        return int(self.indices.size)


@dataclass(frozen=True, eq=False)
class Instance:
    """One document: present-feature indices plus an optional label."""

    features: SparseBinaryVector
    label: Optional[int] = None


@dataclass(eq=False)
class Dataset:
    """An ordered collection of instances over a fixed (K, M) space."""

    instances: tuple
    num_classes: int
    num_features: int

    def __post_init__(self):
        self.instances = tuple(self.instances)
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if self.num_features < 1:
            raise ConfigError(f"need at least 1 feature, got {self.num_features}")
        for i, inst in enumerate(self.instances):
            if inst.features.num_features != self.num_features:
                raise ConfigError(
                    f"instance {i} declares {inst.features.num_features} features, "
                    f"dataset declares {self.num_features}")
            if inst.label is not None and not (0 <= inst.label < self.num_classes):
                raise ConfigError(
                    f"instance {i} has label {inst.label} outside [0, {self.num_classes})")

    def __len__(self):
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    @cached_property
    def index_arrays(self) -> tuple:
        return tuple(inst.features.indices for inst in self.instances)

    @cached_property
    def dense_matrix(self) -> Optional[np.ndarray]:
        """0/1 design matrix (N, M), or None when it would be too large.

        Purely an acceleration cache; sparse per-instance scoring stays the
        source of truth and agrees with this path to float round-off.
        """
        if len(self.instances) * self.num_features > 20_000_000:
            return None
        x = np.zeros((len(self.instances), self.num_features))
        for i, idx in enumerate(self.index_arrays):
            x[i, idx] = 1.0
        return x

    @cached_property
    def labeled_positions(self) -> np.ndarray:
        return np.array([i for i, inst in enumerate(self.instances)
                         if inst.label is not None], dtype=np.int64)

    @cached_property
    def labels(self) -> np.ndarray:
        """Labels of the labeled instances, aligned with labeled_positions."""
        return np.array([self.instances[i].label for i in self.labeled_positions],
                        dtype=np.int64)

    @property
    def n_labeled(self) -> int:
        return int(self.labeled_positions.size)


@dataclass(frozen=True, eq=False)
class GenerativeParams:
    """Class prior pi (K,) and natural feature parameters theta_tilde (K, M).

    Treated as an immutable snapshot; the trainer builds a fresh object per
    update, which is what keeps the cached absence term coherent.
    """

    pi: np.ndarray
    theta_tilde: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        tt = np.asarray(self.theta_tilde, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "theta_tilde", tt)
        if pi.ndim != 1 or tt.ndim != 2 or tt.shape[0] != pi.shape[0]:
            raise ConfigError(f"shape mismatch: pi {pi.shape}, theta_tilde {tt.shape}")
        if np.any(pi <= 0.0) or abs(pi.sum() - 1.0) > _PI_TOL:
            raise ConfigError(f"pi must be positive and sum to 1 within {_PI_TOL}")
        if not np.all(np.isfinite(tt)):
            raise ConfigError("theta_tilde must be finite")

    @property
    def num_classes(self):
        return self.pi.shape[0]

    @property
    def num_features(self):
        return self.theta_tilde.shape[1]

    @cached_property
    def log_pi(self) -> np.ndarray:
        return np.log(self.pi)

    @cached_property
    def absence_base(self) -> np.ndarray:
        """Per-class sum_d log(1 - v_yd) = -sum_d A(t_yd), shape (K,)."""
        return -np.logaddexp(0.0, self.theta_tilde).sum(axis=1)

    def mean(self) -> np.ndarray:
        """Bernoulli means v = sigmoid(theta_tilde)."""
        return expfam.sigmoid(self.theta_tilde)


def uniform_generative_params(num_classes: int, num_features: int) -> GenerativeParams:
    """Uniform pi, theta_tilde = 0 (all means 1/2): the trainer's start state."""
    return GenerativeParams(
        pi=np.full(num_classes, 1.0 / num_classes),
        theta_tilde=np.zeros((num_classes, num_features)),
    )


@dataclass(frozen=True, eq=False)
class DiscriminativeParams:
    """Logistic-regression intercepts b (K,) and weights w (K, M)."""

    b: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        w = np.asarray(self.w, dtype=float)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w", w)
        if b.ndim != 1 or w.ndim != 2 or w.shape[0] != b.shape[0]:
            raise ConfigError(f"shape mismatch: b {b.shape}, w {w.shape}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(w))):
            raise ConfigError("discriminative parameters must be finite")

    @property
    def num_classes(self):
        return self.b.shape[0]

    @property
    def num_features(self):
        return self.w.shape[1]


class CouplingKind(enum.Enum):
    BETA = "beta"
    GAUSSIAN = "gauss"
    DECOUPLED = "none"


@dataclass(frozen=True)
class CouplingConfig:
    """How the two parameter sets are tied together.

    lam is the interpolation knob in [0, 1]: 0 trains the generative model
    alone, 1 the discriminative model alone. Strictly inside, BETA coupling
    uses concentration gamma = ((1-lam)/lam)^2 and GAUSSIAN coupling uses
    sigma_c2 = 1/gamma, so both tighten as lam decreases. Explicitly
    constructed strengths bypass lam (it is then only used for endpoint
    detection and defaults to 0.5). b and pi are never coupled.
    """

    kind: CouplingKind
    lam: float = 0.5
    gamma: Optional[float] = None
    sigma_c2: Optional[float] = None
    disc_prior_sigma2: float = 100.0

    def __post_init__(self):
        if not (0.0 <= self.lam <= 1.0):
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if not (self.disc_prior_sigma2 > 0.0):
            raise ConfigError(f"disc_prior_sigma2 must be > 0, got {self.disc_prior_sigma2}")
        if self.gamma is not None and not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be finite and > 0, got {self.gamma}")
        if self.sigma_c2 is not None and not (self.sigma_c2 > 0.0 and math.isfinite(self.sigma_c2)):
            raise ConfigError(f"sigma_c2 must be finite and > 0, got {self.sigma_c2}")
        if self.kind is CouplingKind.BETA and self.gamma is None and not self._at_endpoint():
            raise ConfigError("BETA coupling needs gamma (directly or via from_lambda)")
        if self.kind is CouplingKind.GAUSSIAN and self.sigma_c2 is None and not self._at_endpoint():
            raise ConfigError("GAUSSIAN coupling needs sigma_c2 (directly or via from_lambda)")

    def _at_endpoint(self):
        return self.lam == 0.0 or self.lam == 1.0

    @classmethod
    def from_lambda(cls, lam: float, kind: CouplingKind = CouplingKind.BETA,
                    disc_prior_sigma2: float = 100.0) -> "CouplingConfig":
        lam = float(lam)
        if not (0.0 <= lam <= 1.0):
            raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
        gamma = sigma_c2 = None
        if 0.0 < lam < 1.0 and kind is not CouplingKind.DECOUPLED:
            g = ((1.0 - lam) / lam) ** 2
            if kind is CouplingKind.BETA:
                gamma = g
            else:
                sigma_c2 = 1.0 / g
        return cls(kind=kind, lam=lam, gamma=gamma, sigma_c2=sigma_c2,
                   disc_prior_sigma2=disc_prior_sigma2)


# ---------------------------------------------------------------------------
# scoring

def nb_class_scores(gen: GenerativeParams, x: SparseBinaryVector) -> np.ndarray:
    """log p(y, x) for every class, shape (K,). O(nnz) per call."""
    return gen.log_pi + gen.absence_base + gen.theta_tilde[:, x.indices].sum(axis=1)


def nb_log_joint_class(gen: GenerativeParams, x: SparseBinaryVector, y: int) -> float:
    """log p(y, x) under the naive Bayes half."""
    if not (0 <= y < gen.num_classes):
        raise DomainError(f"class {y} outside [0, {gen.num_classes})")
    return float(nb_class_scores(gen, x)[y])


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def nb_posterior(gen: GenerativeParams, x: SparseBinaryVector) -> np.ndarray:
    """p(y | x) from the generative half via log-sum-exp, sums to 1."""
    return _softmax(nb_class_scores(gen, x))


def lr_scores(disc: DiscriminativeParams, x: SparseBinaryVector) -> np.ndarray:
    return disc.b + disc.w[:, x.indices].sum(axis=1)


def lr_posterior(disc: DiscriminativeParams, x: SparseBinaryVector) -> np.ndarray:
    """p(y | x) from the logistic-regression half, safe for |scores| ~ 1e4."""
    return _softmax(lr_scores(disc, x))


def predict(disc: DiscriminativeParams, x: SparseBinaryVector) -> int:
    """argmax-probability class; ties resolve to the lowest class index."""
    return int(np.argmax(lr_scores(disc, x)))


def nb_scores_matrix(gen: GenerativeParams, data: Dataset) -> np.ndarray:
    """log p(y, x) for every instance and class, shape (N, K)."""
    base = gen.log_pi + gen.absence_base
    x = data.dense_matrix
    if x is not None:
        return base[None, :] + x @ gen.theta_tilde.T
    scores = np.empty((len(data), gen.num_classes))
    for i, idx in enumerate(data.index_arrays):
        scores[i] = base + gen.theta_tilde[:, idx].sum(axis=1)
    return scores


def lr_scores_matrix(disc: DiscriminativeParams, data: Dataset,
                     positions: Optional[np.ndarray] = None) -> np.ndarray:
    """Logistic scores for the given instance positions (default: all)."""
    if positions is None:
        positions = np.arange(len(data))
    x = data.dense_matrix
    if x is not None:
        return disc.b[None, :] + x[positions] @ disc.w.T
    scores = np.empty((len(positions), disc.num_classes))
    for r, pos in enumerate(positions):
        scores[r] = disc.b + disc.w[:, data.index_arrays[pos]].sum(axis=1)
    return scores


def _logsumexp_rows(scores: np.ndarray) -> np.ndarray:
    m = scores.max(axis=1)
    return m + np.log(np.exp(scores - m[:, None]).sum(axis=1))


# ---------------------------------------------------------------------------
# log joint

@dataclass(frozen=True)
class LogJointBlocks:
    prior: float
    coupling: float
    discriminative: float
    generative: float

    def total(self) -> float:
        return self.prior + self.coupling + self.discriminative + self.generative


def _coupling_block(gen: GenerativeParams, disc: DiscriminativeParams,
                    coupling: CouplingConfig) -> float:
    if coupling.kind is CouplingKind.DECOUPLED:
        return 0.0
    if coupling.kind is CouplingKind.GAUSSIAN:
        diff = gen.theta_tilde - disc.w
        return float(-0.5 / coupling.sigma_c2 * np.sum(diff * diff))
    return float(np.sum(expfam.beta_prior_log_density(
        gen.theta_tilde, disc.w, coupling.gamma)))


def log_joint_blocks(gen: GenerativeParams, disc: DiscriminativeParams,
                     coupling: CouplingConfig, data: Dataset) -> LogJointBlocks:
    """The four additive blocks of the training objective.

    The prior and Gaussian coupling blocks drop additive constants that do
    not depend on any parameter; gradients and convergence traces are
    unaffected.
    """
    prior = float(-0.5 / coupling.disc_prior_sigma2 * np.sum(disc.w * disc.w))

    if data.n_labeled:
        scores = lr_scores_matrix(disc, data, data.labeled_positions)
        picked = scores[np.arange(len(data.labels)), data.labels]
        disc_block = float((picked - _logsumexp_rows(scores)).sum())
    else:
        disc_block = 0.0

    gen_block = float(_logsumexp_rows(nb_scores_matrix(gen, data)).sum())

    return LogJointBlocks(prior=prior,
                          coupling=_coupling_block(gen, disc, coupling),
                          discriminative=disc_block,
                          generative=gen_block)


def log_joint(gen: GenerativeParams, disc: DiscriminativeParams,
              coupling: CouplingConfig, data: Dataset) -> float:
    """Scalar training objective: prior + coupling + discriminative + generative."""
    return log_joint_blocks(gen, disc, coupling, data).total()


# ---------------------------------------------------------------------------
# serialization

_MODEL_MAGIC = "hybridssl-model"
_MODEL_VERSION = "v1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_model(gen: GenerativeParams, disc: DiscriminativeParams) -> str:
    """Serialize the model pair to text; round-trips bit-exactly.

    Layout: a header line "hybridssl-model v1 K=<K> M=<M>", then the
    sections pi, theta_tilde, b, w in that order. Matrix sections are
    row-major, one class per line. All values carry 17 significant digits.
    """
    if gen.num_classes != disc.num_classes or gen.num_features != disc.num_features:
        raise ConfigError("generative and discriminative shapes disagree")
    out = io.StringIO()
    out.write(f"{_MODEL_MAGIC} {_MODEL_VERSION} K={gen.num_classes} M={gen.num_features}\n")
    out.write("pi\n")
    out.write(" ".join(_fmt(v) for v in gen.pi) + "\n")
    out.write("theta_tilde\n")
    for row in gen.theta_tilde:
        out.write(" ".join(_fmt(v) for v in row) + "\n")
    out.write("b\n")
    out.write(" ".join(_fmt(v) for v in disc.b) + "\n")
    out.write("w\n")
    for row in disc.w:
        out.write(" ".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def save_model(gen: GenerativeParams, disc: DiscriminativeParams, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_model(gen, disc))


def _parse_header(line: str):
    parts = line.split()
    if (len(parts) != 4 or parts[0] != _MODEL_MAGIC or parts[1] != _MODEL_VERSION
            or not parts[2].startswith("K=") or not parts[3].startswith("M=")):
        raise ParseError(f"bad model header: expected "
                         f"'{_MODEL_MAGIC} {_MODEL_VERSION} K=<K> M=<M>'", line=1)
    try:
        k = int(parts[2][2:])
        m = int(parts[3][2:])
    except ValueError:
        raise ParseError("model header K/M must be integers", line=1) from None
    return k, m


def loads_model(text: str):
    """Parse dump_model output back into a (gen, disc) pair."""
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty model file", line=1)
    k, m = _parse_header(lines[0])

    sections = {"pi": (1, k), "theta_tilde": (k, m), "b": (1, k), "w": (k, m)}
    cursor = 1
    parsed = {}
    for name, (rows, cols) in sections.items():
        if cursor >= len(lines) or lines[cursor].strip() != name:
            raise ParseError(f"expected section '{name}'", line=cursor + 1)
        cursor += 1
        block = np.empty((rows, cols))
        for r in range(rows):
            if cursor >= len(lines):
                raise ParseError(f"section '{name}' truncated", line=cursor + 1)
            tokens = lines[cursor].split()
            if len(tokens) != cols:
                raise ParseError(f"section '{name}' row has {len(tokens)} values, "
                                 f"expected {cols}", line=cursor + 1)
            try:
                block[r] = [float(t) for t in tokens]
            except ValueError:
                raise ParseError(f"section '{name}' contains a non-numeric token",
                                 line=cursor + 1) from None
            cursor += 1
        parsed[name] = block

    gen = GenerativeParams(pi=parsed["pi"][0], theta_tilde=parsed["theta_tilde"])
    disc = DiscriminativeParams(b=parsed["b"][0], w=parsed["w"])
    return gen, disc


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())
