"""Synthetic dataset generation and CSV ingestion.

Three desk-scale generators:

- ``teacher-regression``: targets are a fixed random tanh network evaluated
  on Gaussian inputs, plus optional Gaussian noise. The teacher is derived
  deterministically from (d, seed) and can be rebuilt with
  :func:`teacher_model` to reproduce noiseless targets.
- ``two-cluster-classification``: two Gaussian blobs with +-1 labels. The
  centers sit at +-u for a seeded unit direction u (distance 2 apart) and
  ``noise`` is the per-coordinate blob standard deviation, so e.g.
  noise = 0.2 gives clusters separated by ten standard deviations.
- ``random-regression``: standard normal inputs and targets (targets scaled
  by ``noise`` when it is positive); used where the labels are incidental.

CSV files use the header ``x1,...,xd,y`` with one sample per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DomainError, ParseError
from ..model import ModelConfig, build_model
from .seeding import child_seed, rng_for

DATASET_KINDS = ("teacher-regression", "two-cluster-classification", "random-regression")


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    name: str
    seed: int

    def __post_init__(self):
        x = np.asarray(self.X, dtype=float)
        y = np.asarray(self.Y, dtype=float)
        if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise DomainError(f"bad dataset shapes X={x.shape}, Y={y.shape}")
        if x.shape[0] < 1:
            raise DomainError("dataset needs at least one sample")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("dataset contains non-finite values")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "Y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def teacher_model(d: int, seed: int):
    """The fixed teacher network behind teacher-regression targets."""
    cfg = ModelConfig(
        input_dim=d,
        hidden_widths=(8,),
        activation="tanh",
        seed=child_seed(seed, "teacher"),
    )
    return build_model(cfg)


def gen_dataset(kind: str, n: int, d: int, noise: float, seed: int) -> Dataset:
    if kind not in DATASET_KINDS:
        raise DomainError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")
    if n < 1 or d < 1:
        raise DomainError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if noise < 0.0:
        raise DomainError(f"noise must be >= 0, got {noise}")

    if kind == "teacher-regression":
        X = rng_for(seed, "X").standard_normal((n, d))
        teacher, theta_t = teacher_model(d, seed)
        Y = teacher.forward(theta_t, X)
        if noise > 0.0:
            Y = Y + noise * rng_for(seed, "noise").standard_normal(n)
    elif kind == "two-cluster-classification":
        u = rng_for(seed, "centers").standard_normal(d)
        u = u / np.linalg.norm(u)
        labels = rng_for(seed, "assign").integers(0, 2, size=n)
        Y = 2.0 * labels - 1.0
        X = Y[:, None] * u[None, :] + noise * rng_for(seed, "blob").standard_normal((n, d))
    else:  # random-regression
        X = rng_for(seed, "X").standard_normal((n, d))
        Y = rng_for(seed, "Y").standard_normal(n)
        if noise > 0.0:
            Y = Y * noise
    return Dataset(X=X, Y=Y, name=kind, seed=seed)


def split_train_eval(ds: Dataset, train_frac: float = 0.8) -> tuple[Dataset, Dataset]:
    """Deterministic held-out split derived from the dataset's own seed."""
    if ds.n < 2:
        raise DomainError("need at least 2 samples to split")
    perm = rng_for(ds.seed, "split").permutation(ds.n)
    cut = min(ds.n - 1, max(1, int(round(train_frac * ds.n))))
    tr, ev = np.sort(perm[:cut]), np.sort(perm[cut:])
    train = Dataset(ds.X[tr], ds.Y[tr], f"{ds.name}-train", ds.seed)
    evaluation = Dataset(ds.X[ev], ds.Y[ev], f"{ds.name}-eval", ds.seed)
    return train, evaluation


def sample_pairs(X: np.ndarray, n_pairs: int, rng: np.random.Generator):
    """Distinct index pairs drawn without replacement up to n_pairs."""
    n = X.shape[0]
    if n < 2:
        raise DomainError("need at least 2 samples to form pairs")
    all_pairs = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]
    if len(all_pairs) > n_pairs:
        picks = rng.choice(len(all_pairs), size=n_pairs, replace=False)
        all_pairs = [all_pairs[i] for i in sorted(picks)]
    return [(X[i], X[j]) for i, j in all_pairs]


def save_csv(ds: Dataset, path) -> Path:
    path = Path(path)
    header = ",".join([f"x{i+1}" for i in range(ds.d)] + ["y"])
    lines = [header]
    for i in range(ds.n):
        cells = [f"{v:.17g}" for v in ds.X[i]] + [f"{ds.Y[i]:.17g}"]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_csv(path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty file", line=1)
    header = [h.strip() for h in lines[0].split(",")]
    d = len(header) - 1
    expected = [f"x{i+1}" for i in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise ParseError(
            f"header must be x1,...,xd,y; got {lines[0]!r}", line=1
        )
    xs, ys = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != d + 1:
            raise ParseError(f"expected {d + 1} columns, got {len(cells)}", line=lineno)
        try:
            row = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"non-numeric value: {exc}", line=lineno) from exc
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite value", line=lineno)
        xs.append(row[:d])
        ys.append(row[d])
    if not xs:
        raise ParseError("file has a header but no data rows", line=2)
    return Dataset(np.array(xs), np.array(ys), name=path.stem, seed=0)
