"""Spectral perturbation analysis for trainable-parameter selection.

Adding a candidate parameter set to fine-tuning perturbs the tangent kernel
from K to K + S, where S is the candidate's own kernel. The relative
perturbation magnitude eta = ||K^{-1/2} S K^{-1/2}|| pins every eigenvalue of
K + S inside [(1 - eta) lambda_i(K), (1 + eta) lambda_i(K)], which combined
with the spectral risk envelope yields computable intervals for risk ratios
between candidate choices, all at initialization. The subset selector ranks
candidate combinations by r_C = lambda_max(K + S_C + sigma I) /
lambda_max(K + sigma I) and returns the argmin.

K is pinned to be invertible before forming K^{-1/2}: when lambda_min(K)
falls below the jitter epsilon, eigenvalues are clamped at zero and the
standard diagonal jitter is added. An already well-conditioned K is used
as-is so boundary cases (eta exactly 1) stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import linalg
from .errors import BoundVacuousError, DomainError, EnumerationLimitError, ShapeError
from .ntk import PSD_RTOL, KernelMatrix

MAX_CANDIDATES = 12


def _kernel(k) -> KernelMatrix:
    return k if isinstance(k, KernelMatrix) else KernelMatrix(np.asarray(k, dtype=float))


def _check_psd(s: KernelMatrix, label: str) -> None:
    lam_min, lam_max = s.lambda_min, s.lambda_max
    if lam_min < -PSD_RTOL * max(lam_max, 0.0) - 1e-12:
        raise DomainError(f"{label} must be PSD (lambda_min={lam_min:.6e})")


def _inv_sqrt_of(k: KernelMatrix) -> np.ndarray:
    """K^{-1/2} from the cached eigendecomposition, jittered only when needed."""
    eig = k.eig
    eps = linalg.jitter_eps(k.matrix)
    values = eig.eigenvalues
    if eig.lambda_min < eps:
        values = np.maximum(values, 0.0) + eps
    q = eig.eigenvectors
    root = (q / np.sqrt(values)) @ q.T
    return 0.5 * (root + root.T)


def eta(k, s) -> float:
    """Relative perturbation magnitude ||K^{-1/2} S K^{-1/2}||."""
    k, s = _kernel(k), _kernel(s)
    if k.matrix.shape != s.matrix.shape:
        raise ShapeError(f"kernel sizes differ: {k.matrix.shape} vs {s.matrix.shape}")
    _check_psd(s, "perturbation kernel S")
    root = _inv_sqrt_of(k)
    similar = root @ s.matrix @ root
    return linalg.spectral_norm(0.5 * (similar + similar.T))


def eigen_intervals(k, s) -> list[tuple[float, float]]:
    """Per-index interval [(1 - eta) lambda_i(K), (1 + eta) lambda_i(K)].

    Each interval contains lambda_i(K + S). Endpoints are returned ordered
    (relevant only for roundoff-negative eigenvalues of K).
    """
    k, s = _kernel(k), _kernel(s)
    e = eta(k, s)
    out = []
    for lam in k.eig.eigenvalues:
        lo, hi = (1.0 - e) * lam, (1.0 + e) * lam
        out.append((min(lo, hi), max(lo, hi)))
    return out


def _lambda_max_sum(k: KernelMatrix, pieces, sigma: float) -> float:
    total = k.matrix.copy()
    for s in pieces:
        total = total + s.matrix
    return linalg.sym_eig(0.5 * (total + total.T)).lambda_max + sigma


def risk_ratio_interval(k, s, sigma: float, c: float | None = None) -> tuple[float, float]:
    """Interval containing sqrt(risk(base + candidate) / risk(base)).

    Needs eta < 1 and kappa(K + sigma I) <= c; c defaults to that kappa, the
    tightest admissible value.
    """
    k, s = _kernel(k), _kernel(s)
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    kappa = linalg.cond_number(k, sigma)
    if c is None:
        c = kappa
    elif kappa > c * (1.0 + 1e-12):
        raise DomainError(f"precondition kappa <= c fails: kappa={kappa:.6g}, c={c:.6g}")
    e = eta(k, s)
    if e >= 1.0:
        raise BoundVacuousError(f"eta={e:.6g} >= 1: the ratio bound is vacuous")
    a = c / (1.0 - e) ** 2
    top_base = k.lambda_max + sigma
    top_pert = _lambda_max_sum(k, [s], sigma)
    return top_pert / (a * top_base), a * top_pert / top_base


def compare_candidates(k, s1, s2, sigma: float, c: float | None = None) -> tuple[float, float]:
    """Interval containing sqrt(risk(base + s1) / risk(base + s2))."""
    k, s1, s2 = _kernel(k), _kernel(s1), _kernel(s2)
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    kappa = linalg.cond_number(k, sigma)
    if c is None:
        c = kappa
    elif kappa > c * (1.0 + 1e-12):
        raise DomainError(f"precondition kappa <= c fails: kappa={kappa:.6g}, c={c:.6g}")
    e1, e2 = eta(k, s1), eta(k, s2)
    if e1 >= 1.0 or e2 >= 1.0:
        raise BoundVacuousError(f"eta1={e1:.6g}, eta2={e2:.6g}: bound needs both < 1")
    b = (c / (1.0 - e1) ** 2) * (c / (1.0 - e2) ** 2)
    top1 = _lambda_max_sum(k, [s1], sigma)
    top2 = _lambda_max_sum(k, [s2], sigma)
    return top1 / (b * top2), b * top1 / top2


@dataclass(frozen=True)
class SpectralReport:
    """Theorem symbols for one candidate kernel against a base kernel."""

    eta: float
    kappa: float
    c: float
    a: float | None
    eig_intervals: tuple[tuple[float, float], ...]
    ratio_interval: tuple[float, float] | None
    r_c: float
    b_pair: float | None = None
    vacuous: bool = False
    inactive_gradient: bool = False


def spectral_report(k, s, sigma: float, c: float | None = None) -> SpectralReport:
    """Assemble the per-candidate report; vacuous bounds are flagged, not raised."""
    k, s = _kernel(k), _kernel(s)
    kappa = linalg.cond_number(k, sigma)
    c_val = kappa if c is None else c
    e = eta(k, s)
    intervals = tuple(eigen_intervals(k, s))
    r_c = _lambda_max_sum(k, [s], sigma) / (k.lambda_max + sigma)
    vacuous = e >= 1.0
    a = None if vacuous else c_val / (1.0 - e) ** 2
    ratio = None
    if not vacuous and kappa <= c_val * (1.0 + 1e-12):
        ratio = risk_ratio_interval(k, s, sigma, c_val)
    return SpectralReport(
        eta=e,
        kappa=kappa,
        c=c_val,
        a=a,
        eig_intervals=intervals,
        ratio_interval=ratio,
        r_c=r_c,
        vacuous=vacuous,
        inactive_gradient=s.provenance.zero_jacobian,
    )


@dataclass(frozen=True)
class LayerSelection:
    """Exhaustive ranking of candidate subsets by spectral ratio r_C."""

    chosen: tuple[int, ...]
    scores: tuple[tuple[tuple[int, ...], float], ...]
    base_lambda_max: float
    sigma: float
    inactive: tuple[int, ...]

    @property
    def table(self) -> dict[tuple[int, ...], float]:
        return dict(self.scores)


def select_layers(k_base, candidates, sigma: float, max_subset_size: int) -> LayerSelection:
    """Enumerate candidate subsets and pick the argmin of r_C.

    r_C = lambda_max(K + sum_{l in C} S_l + sigma I) / lambda_max(K + sigma I),
    over every non-empty subset with |C| <= max_subset_size, in lexicographic
    order of index tuples; ties keep the lexicographically smallest subset.
    The empty subset has ratio 1 by convention and is not enumerated.
    Candidates whose kernels were flagged as zero-Jacobian still participate
    (their S is the zero matrix) but are reported as inactive.
    """
    base = _kernel(k_base)
    kernels = [_kernel(s) for s in candidates]
    if not kernels:
        raise DomainError("need at least one candidate kernel")
    if len(kernels) > MAX_CANDIDATES:
        raise EnumerationLimitError(
            f"{len(kernels)} candidates would enumerate 2^{len(kernels)} subsets; "
            f"keep at most {MAX_CANDIDATES} or lower max_subset_size"
        )
    if max_subset_size < 1:
        raise DomainError(f"max_subset_size must be >= 1, got {max_subset_size}")
    for i, s in enumerate(kernels):
        if s.matrix.shape != base.matrix.shape:
            raise ShapeError(f"candidate {i} size {s.matrix.shape} != base {base.matrix.shape}")
        _check_psd(s, f"candidate kernel {i}")
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")

    denom = base.lambda_max + sigma
    subsets = sorted(
        subset
        for size in range(1, min(max_subset_size, len(kernels)) + 1)
        for subset in combinations(range(len(kernels)), size)
    )
    scores = []
    best = None
    best_r = np.inf
    for subset in subsets:
        r = _lambda_max_sum(base, [kernels[i] for i in subset], sigma) / denom
        scores.append((subset, r))
        if r < best_r:
            best, best_r = subset, r
    return LayerSelection(
        chosen=best,
        scores=tuple(scores),
        base_lambda_max=base.lambda_max,
        sigma=sigma,
        inactive=tuple(i for i, s in enumerate(kernels) if s.provenance.zero_jacobian),
    )
