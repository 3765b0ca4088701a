"""Empirical tangent kernels, closed-form kernel ridge regression, risk bounds.

The empirical kernel for a parameter subset is the Gram matrix of output
gradients: K_ij = grad f(x_i) . grad f(x_j), restricted to the subset's
columns. Per-segment kernels add up exactly to the kernel of their union.
Kernels carry provenance (subset, sample indices, seed, and a flag for
all-zero Jacobians) and cache their eigendecomposition.

Regression uses the closed form alpha = (K + sigma I)^{-1} Y; the training
risk entering spectral bounds is evaluated by the projection formula
sum_i (sigma / (lambda_i + sigma))^2 (u_i . Y)^2 so that solver error never
contaminates bound checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg
from .errors import DomainError, ShapeError, SingularMatrixError

PSD_RTOL = 1e-8
SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class KernelProvenance:
    subset: tuple[str, ...] = ()
    sample_indices: tuple[int, ...] | None = None
    seed: int | None = None
    zero_jacobian: bool = False

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "sample_indices": None if self.sample_indices is None else list(self.sample_indices),
            "seed": self.seed,
            "zero_jacobian": self.zero_jacobian,
        }


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric PSD kernel with cached eigendecomposition and provenance."""

    matrix: np.ndarray = field(repr=False)
    provenance: KernelProvenance = KernelProvenance()

    def __post_init__(self):
        m = linalg.require_symmetric(self.matrix, rtol=SYMMETRY_RTOL)
        object.__setattr__(self, "matrix", 0.5 * (m + m.T))
        object.__setattr__(self, "_eig_cache", None)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def eig(self) -> linalg.EigenDecomposition:
        cached = getattr(self, "_eig_cache")
        if cached is None:
            cached = linalg.sym_eig(self.matrix)
            lam_min, lam_max = cached.lambda_min, cached.lambda_max
            if lam_min < -PSD_RTOL * max(lam_max, 0.0) - 1e-12:
                raise DomainError(
                    f"kernel is not positive semidefinite "
                    f"(lambda_min={lam_min:.6e}, lambda_max={lam_max:.6e})"
                )
            object.__setattr__(self, "_eig_cache", cached)
        return cached

    @property
    def lambda_min(self) -> float:
        return self.eig.lambda_min

    @property
    def lambda_max(self) -> float:
        return self.eig.lambda_max


def empirical_ntk(model, theta, X, subset=None) -> KernelMatrix:
    """Gram matrix of output gradients over ``subset`` at the given parameters.

    Flags all-zero Jacobians in the provenance instead of failing: a freshly
    initialized adapter factor can have an exactly-zero gradient block, and
    ranking code must see that rather than a silent zero kernel.
    """
    jac = model.jacobian(theta, X, subset)
    k = jac @ jac.T
    prov = KernelProvenance(
        subset=tuple(subset) if subset is not None else model.layer_map.ids,
        zero_jacobian=bool(np.all(jac == 0.0)),
    )
    return KernelMatrix(0.5 * (k + k.T), prov)


def layer_kernel(model, theta, X, segment: str) -> KernelMatrix:
    """Kernel contribution of a single named parameter segment."""
    return empirical_ntk(model, theta, X, [segment])


@dataclass(frozen=True)
class KernelRegressor:
    """Closed-form ridge solution alpha = (K + sigma I)^{-1} Y."""

    alpha: np.ndarray
    sigma: float
    train_inputs: np.ndarray = field(repr=False)
    subset: tuple[str, ...] = ()


def fit_kernel_regression(k: KernelMatrix, Y, sigma: float, train_inputs=None) -> KernelRegressor:
    """Solve the kernel ridge system. sigma = 0 is allowed only for PD kernels."""
    y = np.asarray(Y, dtype=float)
    if y.ndim != 1 or y.shape[0] != k.n:
        raise ShapeError(f"targets shape {y.shape} does not match kernel size {k.n}")
    if sigma < 0.0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0.0 and k.lambda_min <= 0.0:
        raise SingularMatrixError(
            f"sigma = 0 needs a positive definite kernel (lambda_min={k.lambda_min:.6e})"
        )
    system = k.matrix + sigma * np.eye(k.n)
    alpha = linalg.spd_solve(system, y)
    inputs = np.zeros((k.n, 0)) if train_inputs is None else np.asarray(train_inputs, float)
    return KernelRegressor(alpha=alpha, sigma=sigma, train_inputs=inputs, subset=k.provenance.subset)


def predict(reg: KernelRegressor, model, theta0, x_new):
    """Evaluate the fitted regressor at new inputs via cross-kernel rows.

    Cross-kernel entries are rebuilt from Jacobians at ``theta0`` on every
    call; the kernel is defined at one parameter point and nothing here may
    silently reuse features from another.
    """
    if reg.train_inputs.size == 0:
        raise DomainError("regressor was fitted without stored training inputs")
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    subset = list(reg.subset) if reg.subset else None
    j_new = model.jacobian(theta0, x, subset)
    j_train = model.jacobian(theta0, reg.train_inputs, subset)
    values = (j_new @ j_train.T) @ reg.alpha
    return float(values[0]) if single else values


def training_predictions(reg: KernelRegressor, k: KernelMatrix) -> np.ndarray:
    return k.matrix @ reg.alpha


def risk_bounds(k: KernelMatrix, Y, sigma: float) -> tuple[float, float]:
    """Spectral envelope for the ridge training risk.

    Returns ((sigma ||Y|| / (sigma + lambda_max))^2,
             (sigma ||Y|| / (sigma + lambda_min))^2).
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    y_norm = float(np.linalg.norm(np.asarray(Y, dtype=float)))
    lower = (sigma * y_norm / (sigma + k.lambda_max)) ** 2
    upper = (sigma * y_norm / (sigma + k.lambda_min)) ** 2
    return lower, upper


def projected_training_risk(k: KernelMatrix, Y, sigma: float) -> float:
    """Exact ridge training risk via the eigenbasis projection formula.

    ||(I - U S (S + sigma I)^{-1} U^T) Y||^2 computed coordinate-wise as
    sum_i (sigma / (lambda_i + sigma))^2 (u_i . Y)^2. Unnormalized (no 1/n);
    report paths echo the mean alongside.
    """
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    y = np.asarray(Y, dtype=float)
    if y.shape != (k.n,):
        raise ShapeError(f"targets shape {y.shape} does not match kernel size {k.n}")
    eig = k.eig
    coeffs = eig.eigenvectors.T @ y
    shrink = sigma / (eig.eigenvalues + sigma)
    return float(np.sum((shrink * coeffs) ** 2))


def sketch_ntk(model, theta, data, m: int, seed: int, subset=None) -> KernelMatrix:
    """Kernel over a uniform without-replacement subsample of the data rows.

    Deterministic per seed; the drawn indices are recorded (sorted) in the
    provenance.
    """
    X = getattr(data, "X", data)
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= m <= n:
        raise DomainError(f"sketch size m={m} must satisfy 1 <= m <= n={n}")
    rng = np.random.default_rng(seed)
    indices = np.sort(rng.choice(n, size=m, replace=False))
    base = empirical_ntk(model, theta, X[indices], subset)
    prov = replace(base.provenance, sample_indices=tuple(int(i) for i in indices), seed=seed)
    return KernelMatrix(base.matrix, prov)
