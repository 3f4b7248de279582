"""Corpus file IO, protocol splits, and the synthetic corpus generator.

Corpus grammar (UTF-8, LF line endings):

    # hybridssl-corpus v1 K=<int> M=<int>
    <label> <id>:1 <id>:1 ...
    * <id>:1 ...

The first line is the mandatory header. A document line starts with a
class label in [0, K) or ``*`` for unlabeled, followed by present-feature
entries ``<id>:1`` with strictly increasing ids below M. Values other
than 1 are rejected: the model is over binary presence, not counts.
Later ``#``-prefixed lines are comments; blank lines are ignored. Parse
errors name the 1-based line and column of the offending token.

An optional sidecar vocabulary maps ids to tokens, one ``<id>\\t<token>``
per line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BoundsError, ConfigError, ParseError
from .model import Dataset, Instance, SparseBinaryVector
from .rng import SplitMix64, derive_seed

_HEADER_RE = re.compile(r"^#\s+hybridssl-corpus\s+v1\s+K=(\d+)\s+M=(\d+)\s*$")
_FEATURE_RE = re.compile(r"^(\d+):(\d+)$")
_TOKEN_RE = re.compile(r"\S+")


def load_corpus(path, m_override: Optional[int] = None) -> Dataset:
    """Parse a corpus file into a Dataset.

    m_override replaces the declared feature count, e.g. to widen a corpus
    to a model's feature space; every feature id must stay below it.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")

    if not lines or _HEADER_RE.match(lines[0]) is None:
        raise ParseError(
            "expected header '# hybridssl-corpus v1 K=<int> M=<int>'", line=1)
    header = _HEADER_RE.match(lines[0])
    num_classes = int(header.group(1))
    num_features = int(header.group(2))
    if num_classes < 2:
        raise ParseError(f"corpus declares K={num_classes}, need K >= 2", line=1)
    if num_features < 1:
        raise ParseError(f"corpus declares M={num_features}, need M >= 1", line=1)
    if m_override is not None:
        if m_override < 1:
            raise ConfigError(f"M override must be >= 1, got {m_override}")
        num_features = int(m_override)

    instances = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip() or text.lstrip().startswith("#"):
            continue
        tokens = list(_TOKEN_RE.finditer(text))
        label_tok = tokens[0]
        col = label_tok.start() + 1
        if label_tok.group() == "*":
            label = None
        else:
            try:
                label = int(label_tok.group())
            except ValueError:
                raise ParseError(f"label must be an integer in [0, {num_classes}) or '*', "
                                 f"got {label_tok.group()!r}", line=lineno, column=col) from None
            if not (0 <= label < num_classes):
                raise BoundsError(f"label {label} outside [0, {num_classes})",
                                  line=lineno, column=col)

        indices = []
        prev = -1
        for tok in tokens[1:]:
            col = tok.start() + 1
            m = _FEATURE_RE.match(tok.group())
            if m is None:
                raise ParseError(f"expected '<id>:1', got {tok.group()!r}",
                                 line=lineno, column=col)
            fid, value = int(m.group(1)), int(m.group(2))
            if value != 1:
                raise ParseError(f"feature values must be 1 (binary presence), got "
                                 f"{tok.group()!r}", line=lineno, column=col)
            if fid >= num_features:
                raise BoundsError(f"feature id {fid} outside [0, {num_features})",
                                  line=lineno, column=col)
            if fid <= prev:
                raise ParseError(f"feature ids must be strictly increasing, "
                                 f"{fid} follows {prev}", line=lineno, column=col)
            indices.append(fid)
            prev = fid
        instances.append(Instance(
            SparseBinaryVector(np.array(indices, dtype=np.int64), num_features), label))

    return Dataset(tuple(instances), num_classes=num_classes, num_features=num_features)


def write_corpus(data: Dataset, path) -> None:
    """Serialize a Dataset in the corpus grammar; inverse of load_corpus."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# hybridssl-corpus v1 K={data.num_classes} M={data.num_features}\n")
        for inst in data:
            label = "*" if inst.label is None else str(inst.label)
            feats = " ".join(f"{int(i)}:1" for i in inst.features.indices)
            fh.write(label + (" " + feats if feats else "") + "\n")


def load_vocabulary(path) -> dict:
    """Sidecar vocabulary: '<id>\\t<token>' per line -> {id: token}."""
    vocab = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.rstrip("\n")
            if not text.strip():
                continue
            parts = text.split("\t")
            if len(parts) != 2 or not parts[1]:
                raise ParseError("expected '<id>\\t<token>'", line=lineno)
            try:
                fid = int(parts[0])
            except ValueError:
                raise ParseError(f"vocabulary id must be an integer, got {parts[0]!r}",
                                 line=lineno) from None
            if fid in vocab:
                raise ParseError(f"duplicate vocabulary id {fid}", line=lineno)
            vocab[fid] = parts[1]
    return vocab


@dataclass(frozen=True)
class SplitSpec:
    """Protocol split: a few labeled docs per class, an unlabeled pool,
    and the rest of the labeled corpus as the test set.

    unlabeled_total must divide evenly across classes; the unlabeled pool
    is balanced per hidden class and its labels are stripped. When
    test_fraction is set, the test set is a seeded subsample of the
    remaining labeled instances instead of all of them.
    """

    labeled_per_class: int
    unlabeled_total: int
    seed: int
    test_fraction: Optional[float] = None

    def __post_init__(self):
        if self.labeled_per_class < 1:
            raise ConfigError(f"labeled_per_class must be >= 1, got {self.labeled_per_class}")
        if self.unlabeled_total < 0:
            raise ConfigError(f"unlabeled_total must be >= 0, got {self.unlabeled_total}")
        if self.test_fraction is not None and not (0.0 < self.test_fraction <= 1.0):
            raise ConfigError(f"test_fraction must lie in (0, 1], got {self.test_fraction}")


def sample_split(full: Dataset, spec: SplitSpec):
    """Draw a (train, test) pair from a labeled corpus.

    Per class: a seeded shuffle of that class's instances, the first
    labeled_per_class kept labeled, the next unlabeled_total/K stripped of
    their labels. Training instances are ordered labeled blocks first
    (class 0..K-1), then unlabeled blocks. The test set is every remaining
    labeled instance in corpus order. Instances of ``full`` that are
    already unlabeled cannot enter the protocol and are ignored.
    Deterministic in spec.seed.
    """
    k = full.num_classes
    if spec.unlabeled_total % k != 0:
        raise ConfigError(f"unlabeled_total {spec.unlabeled_total} not divisible by "
                          f"K={k} classes")
    per_class_unlabeled = spec.unlabeled_total // k

    pools = [[] for _ in range(k)]
    for pos, inst in enumerate(full):
        if inst.label is not None:
            pools[inst.label].append(pos)

    need = spec.labeled_per_class + per_class_unlabeled
    taken = set()
    labeled_blocks, unlabeled_blocks = [], []
    for c in range(k):
        if len(pools[c]) < need:
            raise ConfigError(
                f"class {c} has {len(pools[c])} labeled instances, protocol needs "
                f"{need} ({spec.labeled_per_class} labeled + {per_class_unlabeled} unlabeled)")
        order = list(pools[c])
        SplitMix64(derive_seed(spec.seed, c)).shuffle(order)
        labeled_blocks.append(order[:spec.labeled_per_class])
        unlabeled_blocks.append(order[spec.labeled_per_class:need])
        taken.update(order[:need])

    train_instances = []
    for block in labeled_blocks:
        train_instances.extend(full.instances[p] for p in block)
    for block in unlabeled_blocks:
        train_instances.extend(Instance(full.instances[p].features, None) for p in block)

    remaining = [pos for pos in range(len(full))
                 if pos not in taken and full.instances[pos].label is not None]
    if spec.test_fraction is not None and spec.test_fraction < 1.0:
        order = list(remaining)
        SplitMix64(derive_seed(spec.seed, k)).shuffle(order)
        keep = max(1, round(spec.test_fraction * len(order)))
        remaining = sorted(order[:keep])
    test_instances = [full.instances[p] for p in remaining]

    train = Dataset(tuple(train_instances), k, full.num_features)
    test = Dataset(tuple(test_instances), k, full.num_features)
    return train, test


def synthetic_true_params(num_classes: int, num_features: int, class_separation: float):
    """(pi, probs) the synthetic generator samples from.

    Feature space is carved into K equal signal blocks of size M // K
    (any leftover features are background). Class c emits its own block
    with probability 0.5 + separation/2, the other blocks with
    0.5 - separation/2, and background features with probability 0.1, so
    separation = 0 makes the classes indistinguishable.
    """
    if num_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {num_classes}")
    if num_features < num_classes:
        raise ConfigError(f"need at least one feature per class, got M={num_features} "
                          f"for K={num_classes}")
    if not (0.0 <= class_separation <= 1.0):
        raise ConfigError(f"class_separation must lie in [0, 1], got {class_separation}")
    block = num_features // num_classes
    probs = np.full((num_classes, num_features), 0.1)
    probs[:, :block * num_classes] = 0.5 - class_separation / 2.0
    for c in range(num_classes):
        probs[c, c * block:(c + 1) * block] = 0.5 + class_separation / 2.0
    pi = np.full(num_classes, 1.0 / num_classes)
    return pi, probs


def generate_synthetic(num_classes: int, num_features: int, docs_per_class: int,
                       class_separation: float, seed: int) -> Dataset:
    """Sample a fully labeled corpus from synthetic_true_params.

    Documents are ordered class-major (all of class 0, then class 1, ...).
    Identical seeds give identical corpora.
    """
    if docs_per_class < 1:
        raise ConfigError(f"docs_per_class must be >= 1, got {docs_per_class}")
    _, probs = synthetic_true_params(num_classes, num_features, class_separation)
    rng = np.random.default_rng(seed)
    instances = []
    for c in range(num_classes):
        draws = rng.random((docs_per_class, num_features)) < probs[c]
        for row in draws:
            idx = np.flatnonzero(row).astype(np.int64)
            instances.append(Instance(SparseBinaryVector(idx, num_features), c))
    return Dataset(tuple(instances), num_classes, num_features)
