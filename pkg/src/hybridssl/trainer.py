"""Coordinate-descent training of the coupled classifier pair.

One outer iteration alternates two moves:

  1. Generative step. Class responsibilities p(y | x) are computed once
     from the current theta_tilde and reused for every coordinate. Under
     BETA coupling the step is the closed form

         v_yd = (sum_x p(y | x) x_d + gamma * sigmoid(w_yd)) / (N + gamma),
         pi_y = sum_x p(y | x) / N,

     with N the total number of documents (labeled and unlabeled alike;
     labels never enter this step). Each coordinate's new value maximizes
     the separable surrogate (c + alpha) t - (N + gamma) A(t) exactly, so
     the surrogate never decreases. Under GAUSSIAN coupling no closed form
     exists and the same surrogate with a quadratic coupling term is
     maximized by gradient ascent with backtracking.

  2. Discriminative step. A few epochs of per-example SGD on the labeled
     documents update (w, b) against the data term; once per epoch the
     prior and coupling gradients are applied as a single full step. The
     per-epoch step uses min(eta_t, 1 / (1 + 1/sigma^2 + stiffness)) where
     stiffness bounds the coupling curvature (gamma/4 for BETA,
     1/sigma_c2 for GAUSSIAN); without the bound a strongly coupled run
     (gamma ~ 1e6) diverges on the first epoch.

The interpolation knob lam maps to gamma = ((1-lam)/lam)^2. Values inside
lambda_clamp of the endpoints short-circuit to the standalone trainers:
naive Bayes EM at lam = 0 and plain SGD logistic regression at lam = 1.

Determinism: SGD epoch order is drawn from the splitmix64 stream seeded by
(cfg.seed, outer_iter, epoch); identical inputs give bit-identical
parameters and traces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import expfam
from .errors import ConfigError, DomainError, NumericError
from .model import (CouplingConfig, CouplingKind, Dataset, DiscriminativeParams,
                    GenerativeParams, log_joint, lr_scores_matrix, nb_scores_matrix,
                    uniform_generative_params)
from .rng import SplitMix64, derive_seed


class EndpointMode(enum.Enum):
    HYBRID = "hybrid"
    PURE_GENERATIVE = "pure_generative"
    PURE_DISCRIMINATIVE = "pure_discriminative"


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for the outer loop and the SGD inner loop.

    Convergence: the run stops once the objective trace satisfies
    |L_k - L_{k-1}| <= tol * max(1, |L_{k-1}|, |L_k|). The learning rate
    decays with the global example-update count t as
    eta_t = learning_rate0 / (1 + t / lr_decay_steps).
    """

    max_outer_iters: int = 200
    tol: float = 1e-6
    sgd_epochs_per_outer: int = 5
    learning_rate0: float = 0.1
    lr_decay_steps: float = 1000.0
    seed: int = 0
    lambda_clamp: float = 1e-3
    gauss_inner_tol: float = 1e-6
    gauss_max_steps: int = 500
    em_smoothing: float = 1e-2

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ConfigError(f"max_outer_iters must be >= 1, got {self.max_outer_iters}")
        if not (self.tol > 0.0):
            raise ConfigError(f"tol must be > 0, got {self.tol}")
        if self.sgd_epochs_per_outer < 1:
            raise ConfigError(f"sgd_epochs_per_outer must be >= 1, got {self.sgd_epochs_per_outer}")
        if not (self.learning_rate0 > 0.0):
            raise ConfigError(f"learning_rate0 must be > 0, got {self.learning_rate0}")
        if not (self.lr_decay_steps > 0.0):
            raise ConfigError(f"lr_decay_steps must be > 0, got {self.lr_decay_steps}")
        if not (0.0 < self.lambda_clamp < 0.5):
            raise ConfigError(f"lambda_clamp must lie in (0, 0.5), got {self.lambda_clamp}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")

    def learning_rate(self, step: int) -> float:
        return self.learning_rate0 / (1.0 + step / self.lr_decay_steps)


@dataclass
class TrainReport:
    log_joint_trace: list
    outer_iters_run: int
    converged: bool
    endpoint_mode: EndpointMode


def lambda_to_gamma(lam: float) -> float:
    """gamma = ((1 - lam) / lam)^2 for lam strictly inside (0, 1)."""
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lambda_to_gamma requires lambda in (0, 1), got {lam}")
    return ((1.0 - lam) / lam) ** 2


def _rel_change(prev: float, curr: float) -> float:
    return abs(curr - prev) / max(1.0, abs(prev), abs(curr))


def _responsibilities(gen: GenerativeParams, data: Dataset) -> np.ndarray:
    """p(y | x, theta_tilde) for every document, shape (N, K)."""
    scores = nb_scores_matrix(gen, data)
    scores -= scores.max(axis=1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=1, keepdims=True)
    return scores


def _expected_counts(data: Dataset, resp: np.ndarray) -> np.ndarray:
    """c_yd = sum_x p(y | x) x_d, shape (K, M)."""
    x = data.dense_matrix
    if x is not None:
        return resp.T @ x
    counts = np.zeros((resp.shape[1], data.num_features))
    for i, idx in enumerate(data.index_arrays):
        counts[:, idx] += resp[i][:, None]
    return counts


_PI_FLOOR = 1e-12


def _mixing_weights(class_mass: np.ndarray) -> np.ndarray:
    """Normalized mixing proportions from per-class responsibility mass.

    A component that loses every document can see its mass underflow to
    exactly zero, which would put log pi at -inf and kill the run; the
    floor binds only in that degenerate regime and leaves healthy updates
    exactly equal to class_mass / class_mass.sum().
    """
    mass = np.maximum(class_mass, _PI_FLOOR)
    return mass / mass.sum()


def _coupled_generative_step(data, resp, w, gamma):
    """Shared closed form; gamma = 0 gives the decoupled count update."""
    n = len(data)
    counts = _expected_counts(data, resp)
    pseudo = gamma * expfam.sigmoid(w) if gamma > 0.0 else 0.0
    v = (counts + pseudo) / (n + gamma)
    return GenerativeParams(pi=_mixing_weights(resp.sum(axis=0)),
                            theta_tilde=expfam.natural_from_mean(v))


def generative_update_beta(data: Dataset, gen_old: GenerativeParams,
                           disc: DiscriminativeParams, gamma: float,
                           resp: np.ndarray = None) -> GenerativeParams:
    """Closed-form generative step under BETA coupling.

    Responsibilities come from gen_old unless precomputed ones are passed
    in (the trainer reuses the matrix from its objective evaluation).
    """
    if not (gamma > 0.0) or not math.isfinite(gamma):
        raise DomainError(f"gamma must be finite and > 0, got {gamma}")
    if resp is None:
        resp = _responsibilities(gen_old, data)
    return _coupled_generative_step(data, resp, disc.w, gamma)


def generative_update_gauss(data: Dataset, gen_old: GenerativeParams,
                            disc: DiscriminativeParams, sigma_c2: float,
                            inner_tol: float = 1e-6, max_steps: int = 500,
                            resp: np.ndarray = None) -> GenerativeParams:
    """Generative step under GAUSSIAN coupling, by backtracked gradient ascent.

    Maximizes the concave surrogate

        G(t) = -||t - w||^2 / (2 sigma_c2) + sum_yd [c_yd t_yd - N A(t_yd)]

    until the gradient infinity-norm falls below inner_tol. Raises
    NumericError (with the last iterate attached) after max_steps.
    """
    if not (sigma_c2 > 0.0) or not math.isfinite(sigma_c2):
        raise DomainError(f"sigma_c2 must be finite and > 0, got {sigma_c2}")
    if resp is None:
        resp = _responsibilities(gen_old, data)
    n = len(data)
    counts = _expected_counts(data, resp)
    w = disc.w

    def objective(t):
        return (-0.5 / sigma_c2 * np.sum((t - w) ** 2)
                + np.sum(counts * t) - n * np.sum(np.logaddexp(0.0, t)))

    t = gen_old.theta_tilde.copy()
    obj = objective(t)
    step_size = 1.0
    # A''(t) = sigmoid'(t) <= 1/4, so any ascent step no larger than 1/L is
    # guaranteed not to decrease the concave objective even when the gain is
    # too small to measure in floating point; backtracking stops there.
    safe_step = 1.0 / (1.0 / sigma_c2 + 0.25 * n)
    for _ in range(max_steps):
        grad = -(t - w) / sigma_c2 + counts - n * expfam.sigmoid(t)
        if np.abs(grad).max() <= inner_tol:
            return GenerativeParams(pi=_mixing_weights(resp.sum(axis=0)), theta_tilde=t)
        g2 = np.sum(grad * grad)
        step_size = min(step_size * 2.0, 1e8)
        while True:
            cand = t + step_size * grad
            cand_obj = objective(cand)
            # demanding half the linearized gain rejects overshooting steps
            # that ascend but oscillate, instead of crawling at ~2/L
            if cand_obj >= obj + 0.5 * step_size * g2 or step_size <= safe_step:
                break
            step_size *= 0.5
        t, obj = cand, cand_obj
    raise NumericError(
        f"gaussian generative step did not reach tolerance {inner_tol} "
        f"within {max_steps} ascent steps",
        snapshot={"theta_tilde": t, "objective": obj,
                  "grad_inf_norm": float(np.abs(grad).max())})


def _coupling_grad_w(theta_tilde: np.ndarray, w: np.ndarray,
                     coupling: CouplingConfig) -> np.ndarray:
    if coupling.kind is CouplingKind.DECOUPLED:
        return np.zeros_like(w)
    if coupling.kind is CouplingKind.GAUSSIAN:
        return (theta_tilde - w) / coupling.sigma_c2
    gamma = coupling.gamma
    s = expfam.sigmoid(w)
    alpha = gamma * s
    psi_diff = expfam.digamma(alpha + 1.0) - expfam.digamma(gamma - alpha + 1.0)
    return gamma * s * (1.0 - s) * (theta_tilde - psi_diff)


def coupling_gradient_w(gen: GenerativeParams, disc: DiscriminativeParams,
                        coupling: CouplingConfig) -> np.ndarray:
    """d(coupling block)/dw, shape (K, M).

    BETA: per coordinate, with s = sigmoid(w) and alpha = gamma * s,

        gamma * s * (1 - s) * [theta_tilde - (psi(alpha + 1) - psi(gamma - alpha + 1))]

    which combines the log-normalizer derivative and the linear term.
    GAUSSIAN: (theta_tilde - w) / sigma_c2. DECOUPLED: zero.
    """
    return _coupling_grad_w(gen.theta_tilde, disc.w, coupling)


def discriminative_gradient(data: Dataset, gen: GenerativeParams,
                            disc: DiscriminativeParams,
                            coupling: CouplingConfig):
    """Full-batch gradient of the log joint w.r.t. (w, b).

    The generative block does not involve (w, b), so the gradient is the
    Gaussian prior term -w/sigma^2, the coupling term, and the labeled
    data term sum_x x_d (1{t=y} - p(y | x, w, b)).
    """
    grad_w = -disc.w / coupling.disc_prior_sigma2 + coupling_gradient_w(gen, disc, coupling)
    grad_b = np.zeros_like(disc.b)
    if data.n_labeled:
        scores = lr_scores_matrix(disc, data, data.labeled_positions)
        scores -= scores.max(axis=1, keepdims=True)
        np.exp(scores, out=scores)
        scores /= scores.sum(axis=1, keepdims=True)
        resid = -scores
        resid[np.arange(len(data.labels)), data.labels] += 1.0
        grad_b += resid.sum(axis=0)
        for r, pos in enumerate(data.labeled_positions):
            grad_w[:, data.index_arrays[pos]] += resid[r][:, None]
    return grad_w, grad_b


def _coupling_stiffness(coupling: CouplingConfig) -> float:
    """Upper bound on the coupling gradient's curvature in w.

    gamma * s(1-s) <= gamma/4 for BETA; 1/sigma_c2 for GAUSSIAN. Caps the
    per-epoch step so stiff couplings stay stable.
    """
    if coupling.kind is CouplingKind.BETA:
        return coupling.gamma / 4.0
    if coupling.kind is CouplingKind.GAUSSIAN:
        return 1.0 / coupling.sigma_c2
    return 0.0


def _sgd_epochs(data, theta_tilde, coupling, b, w, cfg, outer_iter, step):
    """Run cfg.sgd_epochs_per_outer SGD epochs in place on (b, w).

    Per example: the data-term gradient of that example alone. Per epoch:
    one full prior(+coupling) step. Returns the new global step count.
    """
    positions = data.labeled_positions
    labels = data.labels
    feats = [data.index_arrays[p] for p in positions]
    order = list(range(len(positions)))
    stiffness = _coupling_stiffness(coupling)
    sigma2 = coupling.disc_prior_sigma2
    for epoch in range(cfg.sgd_epochs_per_outer):
        SplitMix64(derive_seed(cfg.seed, outer_iter, epoch)).shuffle(order)
        for i in order:
            idx = feats[i]
            scores = b + w[:, idx].sum(axis=1)
            scores -= scores.max()
            p = np.exp(scores)
            p /= p.sum()
            p = -p
            p[labels[i]] += 1.0
            eta = cfg.learning_rate(step)
            b += eta * p
            w[:, idx] += eta * p[:, None]
            step += 1
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            return step  # blowup; reported as NumericError by the caller
        eta = min(cfg.learning_rate(step), 1.0 / (1.0 + 1.0 / sigma2 + stiffness))
        grad = -w / sigma2
        if coupling.kind is not CouplingKind.DECOUPLED:
            grad = grad + _coupling_grad_w(theta_tilde, w, coupling)
        w += eta * grad
    return step


def _finish(trace, converged, mode):
    return TrainReport(log_joint_trace=trace, outer_iters_run=len(trace),
                       converged=converged, endpoint_mode=mode)


def _check_finite(value, it, mode, **state):
    """Raise NumericError with a diagnostic snapshot on NaN or infinity."""
    bad = None
    if not math.isfinite(value):
        bad = "objective"
    else:
        for name, arr in state.items():
            if arr is not None and not np.all(np.isfinite(arr)):
                bad = name
                break
    if bad is not None:
        snapshot = {"outer_iter": it, "mode": mode.value, "objective": value}
        snapshot.update(state)
        raise NumericError(f"{bad} became non-finite at outer iteration {it}",
                           snapshot=snapshot)


def _lr_label_log_probs(b, w, data):
    """Row-wise log p(label | x) over the labeled instances, from raw arrays."""
    x = data.dense_matrix
    if x is not None:
        scores = b[None, :] + x[data.labeled_positions] @ w.T
    else:
        scores = np.empty((data.n_labeled, b.shape[0]))
        for r, pos in enumerate(data.labeled_positions):
            scores[r] = b + w[:, data.index_arrays[pos]].sum(axis=1)
    row_max = scores.max(axis=1)
    lse = row_max + np.log(np.exp(scores - row_max[:, None]).sum(axis=1))
    return scores[np.arange(len(data.labels)), data.labels] - lse


def train_nb_em(data: Dataset, cfg: TrainConfig):
    """Standalone semi-supervised naive Bayes EM (the lam = 0 endpoint).

    Labeled documents contribute hard (one-hot) responsibilities, unlabeled
    ones their posterior. The M-step is the smoothed count ratio

        v_yd = (c_yd + eps) / (n_y + 2 eps),  eps = cfg.em_smoothing,

    and the trace records sum over labeled docs of log p(x, t) plus sum
    over unlabeled docs of log sum_y p(x, y).
    """
    k, n = data.num_classes, len(data)
    gen = uniform_generative_params(k, data.num_features)
    labeled_mask = np.zeros(n, dtype=bool)
    labeled_mask[data.labeled_positions] = True
    hard = np.zeros((data.n_labeled, k))
    hard[np.arange(len(data.labels)), data.labels] = 1.0

    trace = []
    converged = False
    for it in range(cfg.max_outer_iters):
        scores = nb_scores_matrix(gen, data)
        row_max = scores.max(axis=1)
        lse = row_max + np.log(np.exp(scores - row_max[:, None]).sum(axis=1))
        objective = float(scores[data.labeled_positions, data.labels].sum()
                          + lse[~labeled_mask].sum())

        resp = np.exp(scores - lse[:, None])
        resp[data.labeled_positions] = hard
        class_mass = resp.sum(axis=0)
        counts = _expected_counts(data, resp)
        eps = cfg.em_smoothing
        v = (counts + eps) / (class_mass[:, None] + 2.0 * eps)
        gen = GenerativeParams(pi=_mixing_weights(class_mass),
                               theta_tilde=expfam.natural_from_mean(v))

        _check_finite(objective, it, EndpointMode.PURE_GENERATIVE,
                      theta_tilde=gen.theta_tilde)
        trace.append(objective)
        if it > 0 and _rel_change(trace[-2], trace[-1]) < cfg.tol:
            converged = True
            break
    return gen, _finish(trace, converged, EndpointMode.PURE_GENERATIVE)


def train_logreg(data: Dataset, cfg: TrainConfig, disc_prior_sigma2: float = 100.0):
    """Standalone SGD logistic regression (the lam = 1 endpoint)."""
    if data.n_labeled == 0:
        raise ConfigError("training requires at least one labeled instance")
    k, m = data.num_classes, data.num_features
    b = np.zeros(k)
    w = np.zeros((k, m))
    prior_only = CouplingConfig(kind=CouplingKind.DECOUPLED, lam=1.0,
                                disc_prior_sigma2=disc_prior_sigma2)
    trace = []
    converged = False
    step = 0
    for it in range(cfg.max_outer_iters):
        step = _sgd_epochs(data, None, prior_only, b, w, cfg, it, step)
        objective = float(_lr_label_log_probs(b, w, data).sum()
                          - 0.5 / disc_prior_sigma2 * np.sum(w * w))
        _check_finite(objective, it, EndpointMode.PURE_DISCRIMINATIVE, b=b, w=w)
        trace.append(objective)
        if it > 0 and _rel_change(trace[-2], trace[-1]) < cfg.tol:
            converged = True
            break
    return DiscriminativeParams(b=b, w=w), _finish(trace, converged,
                                                   EndpointMode.PURE_DISCRIMINATIVE)


def train(data: Dataset, coupling: CouplingConfig, cfg: TrainConfig):
    """Train the coupled pair; returns (gen, disc, report).

    lam within cfg.lambda_clamp of 0 or 1 dispatches to the standalone
    endpoint trainers. The lam = 0 endpoint exposes its naive Bayes fit
    through the discriminative slot in linear form (w = theta_tilde,
    b = log pi + per-class absence mass) so that prediction is always a
    function of (w, b) and matches the generative argmax instance-exactly.
    """
    if data.n_labeled == 0:
        raise ConfigError("training requires at least one labeled instance")

    if coupling.lam <= cfg.lambda_clamp:
        gen, report = train_nb_em(data, cfg)
        # The linear form of the naive Bayes decision rule: w = theta_tilde
        # and b absorbing both the class prior and the per-class absence
        # mass, so predict() reproduces the generative argmax exactly.
        disc = DiscriminativeParams(b=gen.log_pi + gen.absence_base,
                                    w=gen.theta_tilde.copy())
        return gen, disc, report
    if coupling.lam >= 1.0 - cfg.lambda_clamp:
        disc, report = train_logreg(data, cfg, coupling.disc_prior_sigma2)
        gen = uniform_generative_params(data.num_classes, data.num_features)
        return gen, disc, report

    if coupling.kind is CouplingKind.BETA and coupling.gamma is None:
        raise ConfigError("hybrid BETA training requires a coupling gamma")
    if coupling.kind is CouplingKind.GAUSSIAN and coupling.sigma_c2 is None:
        raise ConfigError("hybrid GAUSSIAN training requires sigma_c2")

    k, m = data.num_classes, data.num_features
    gen = uniform_generative_params(k, m)
    b = np.zeros(k)
    w = np.zeros((k, m))
    resp = _responsibilities(gen, data)

    trace = []
    converged = False
    step = 0
    for it in range(cfg.max_outer_iters):
        disc = DiscriminativeParams(b=b.copy(), w=w.copy())
        if coupling.kind is CouplingKind.BETA:
            gen = generative_update_beta(data, gen, disc, coupling.gamma, resp=resp)
        elif coupling.kind is CouplingKind.GAUSSIAN:
            gen = generative_update_gauss(data, gen, disc, coupling.sigma_c2,
                                          inner_tol=cfg.gauss_inner_tol,
                                          max_steps=cfg.gauss_max_steps, resp=resp)
        else:
            gen = _coupled_generative_step(data, resp, w, 0.0)

        step = _sgd_epochs(data, gen.theta_tilde, coupling, b, w, cfg, it, step)

        _check_finite(0.0, it, EndpointMode.HYBRID, b=b, w=w)
        disc = DiscriminativeParams(b=b.copy(), w=w.copy())
        objective = log_joint(gen, disc, coupling, data)
        _check_finite(objective, it, EndpointMode.HYBRID,
                      theta_tilde=gen.theta_tilde)
        trace.append(objective)
        # responsibilities under the just-updated generative parameters;
        # SGD did not touch them, so next iteration's E-step reuses these.
        resp = _responsibilities(gen, data)
        if it > 0 and _rel_change(trace[-2], trace[-1]) < cfg.tol:
            converged = True
            break

    disc = DiscriminativeParams(b=b, w=w)
    return gen, disc, _finish(trace, converged, EndpointMode.HYBRID)
