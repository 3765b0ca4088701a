"""Dense symmetric linear algebra for kernel-sized problems.

Matrices are plain float64 numpy arrays. The eigensolver is a cyclic Jacobi
sweep: slower than LAPACK but self-contained, numerically robust, and more
than fast enough for the matrix sizes this package produces (n <= ~512, since
kernels are built from data sketches). Everything here is a pure function of
its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError, SingularMatrixError

# Relative asymmetry tolerated before an input is rejected as non-symmetric.
ASYMMETRY_RTOL = 1e-12

# Off-diagonal Frobenius threshold and sweep cap for the Jacobi iteration.
JACOBI_RTOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix entries must be finite")
    return a


def require_symmetric(m, rtol: float = ASYMMETRY_RTOL) -> np.ndarray:
    """Validate and return ``m`` as a square symmetric float64 array."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max() if a.size else 0.0
    gap = np.abs(a - a.T).max() if a.size else 0.0
    if gap > rtol * max(scale, 1e-300):
        raise ShapeError(
            f"matrix is not symmetric (max asymmetry {gap:.3e}, scale {scale:.3e})"
        )
    return a


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order; eigenvectors as orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.T

    def orthonormality_error(self) -> float:
        q = self.eigenvectors
        n = q.shape[0]
        return float(np.abs(q.T @ q - np.eye(n)).max())


def sym_eig(m, *, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius mass drops below
    ``1e-12 * ||M||_F``. Reconstruction error is at machine-precision level
    for the sizes used here.
    """
    a = require_symmetric(m)
    n = a.shape[0]
    a = 0.5 * (a + a.T)  # exact symmetry so rotations stay consistent
    q = np.eye(n)
    scale = math.sqrt(float((a * a).sum()))
    if n > 1 and scale > 0.0:
        tol = JACOBI_RTOL * scale
        skip = tol / n  # per-element threshold; total off-mass stays under tol
        for _ in range(max_sweeps):
            off2 = float((a * a).sum() - (np.diag(a) ** 2).sum())
            if math.sqrt(max(off2, 0.0)) <= tol:
                break
            for p in range(n - 1):
                for r in range(p + 1, n):
                    apr = a[p, r]
                    if abs(apr) <= skip:
                        continue
                    beta = (a[r, r] - a[p, p]) / (2.0 * apr)
                    t = math.copysign(1.0, beta) / (abs(beta) + math.hypot(beta, 1.0))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = t * c
                    col_p, col_r = a[:, p].copy(), a[:, r].copy()
                    a[:, p] = c * col_p - s * col_r
                    a[:, r] = s * col_p + c * col_r
                    row_p, row_r = a[p, :].copy(), a[r, :].copy()
                    a[p, :] = c * row_p - s * row_r
                    a[r, :] = s * row_p + c * row_r
                    a[p, r] = a[r, p] = 0.0
                    q_p, q_r = q[:, p].copy(), q[:, r].copy()
                    q[:, p] = c * q_p - s * q_r
                    q[:, r] = s * q_p + c * q_r
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return EigenDecomposition(values[order], q[:, order])


def _cholesky(a: np.ndarray) -> np.ndarray | None:
    n = a.shape[0]
    lower = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - lower[j, :j] @ lower[j, :j]
        if not (d > 0.0) or not np.isfinite(d):
            return None
        lower[j, j] = math.sqrt(d)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def spd_solve(m, rhs) -> np.ndarray:
    """Solve ``m x = rhs`` for symmetric positive definite ``m`` via Cholesky."""
    a = require_symmetric(m)
    b = np.asarray(rhs, dtype=float)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ShapeError(f"rhs shape {b.shape} does not match matrix {a.shape}")
    lower = _cholesky(a)
    if lower is None:
        lam_min = sym_eig(a).lambda_min
        raise SingularMatrixError(
            f"matrix is not positive definite (lambda_min={lam_min:.6e})"
        )
    n = a.shape[0]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - lower[i + 1 :, i] @ x[i + 1 :]) / lower[i, i]
    return x


def inv_sqrt(m) -> np.ndarray:
    """Inverse square root R of an SPD matrix, with R m R = I."""
    eig = sym_eig(m)
    if eig.lambda_min <= 0.0:
        raise SingularMatrixError(
            f"inverse square root needs a positive definite matrix "
            f"(lambda_min={eig.lambda_min:.6e})"
        )
    q = eig.eigenvectors
    root = (q / np.sqrt(eig.eigenvalues)) @ q.T
    return 0.5 * (root + root.T)


def spectral_norm(m) -> float:
    """Spectral norm of a symmetric matrix: max |eigenvalue|."""
    eig = sym_eig(m)
    return float(np.abs(eig.eigenvalues).max()) if eig.eigenvalues.size else 0.0


def operator_norm(m) -> float:
    """Largest singular value of a general rectangular matrix.

    Computed from the eigenvalues of the smaller Gram matrix.
    """
    a = as_matrix(m)
    gram = a @ a.T if a.shape[0] <= a.shape[1] else a.T @ a
    gram = 0.5 * (gram + gram.T)
    top = sym_eig(gram).lambda_max
    return math.sqrt(max(top, 0.0))


def _eigenvalues_of(k) -> np.ndarray:
    """Ascending eigenvalues of a KernelMatrix, EigenDecomposition, or array."""
    eig = getattr(k, "eig", None)
    if eig is not None:
        return eig.eigenvalues
    if isinstance(k, EigenDecomposition):
        return k.eigenvalues
    return sym_eig(k).eigenvalues


def cond_number(k, sigma: float) -> float:
    """Regularized condition number (lambda_max + sigma) / (lambda_min + sigma)."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    values = _eigenvalues_of(k)
    return (float(values[-1]) + sigma) / (float(values[0]) + sigma)


def jitter_eps(m) -> float:
    """Diagonal jitter used to make PSD matrices safely positive definite."""
    a = require_symmetric(m)
    n = a.shape[0]
    return max(1e-12, 1e-10 * float(np.trace(a)) / n)


def jitter_spd(m) -> np.ndarray:
    """Return ``m + eps I`` with eps = max(1e-12, 1e-10 tr(m)/n).

    Rejects inputs whose smallest eigenvalue is materially negative, i.e. far
    beyond what roundoff on a PSD Gram matrix can produce.
    """
    a = require_symmetric(m)
    n = a.shape[0]
    eps = jitter_eps(a)
    lam_min = sym_eig(a).lambda_min
    floor = -(1e-10 * max(float(np.trace(a)), 0.0) / n + 1e-12)
    if lam_min < floor:
        raise DomainError(
            f"matrix is not positive semidefinite (lambda_min={lam_min:.6e})"
        )
    return a + eps * np.eye(n)
