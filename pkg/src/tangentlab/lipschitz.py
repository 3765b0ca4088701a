"""Empirical Lipschitz profiles over spherical shells around theta0.

Models are sampled on shells theta = theta0 + r v / ||v||, v standard normal,
for radii on a uniform grid [0, r_max]. For each sampled model the largest
difference quotient |f(x') - f(x)| / ||x' - x|| over a fixed set of input
pairs is recorded; the per-radius average and maximum are taken over the
*cumulative* list of per-model maxima (the list is never reset as the radius
grows, so the upper profile is nondecreasing by construction). A per-radius
reset variant exists for sensitivity studies.

The gradient-smoothness profile uses the same shells with parameter pairs
(theta0, theta): the ratio is the spectral norm of the Jacobian difference
divided by ||theta - theta0||, again accumulated cumulatively.

Shell draws are derived from (seed, namespace, radius index, model index), so
results do not depend on evaluation order and are reproducible per seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError
from .dynamics import TrainTrace

_NS_VALUE = 0  # spawn-key namespace for function-difference shells
_NS_GRAD = 1  # spawn-key namespace for gradient-difference shells


def shell_direction(seed: int, namespace: int, radius_idx: int, model_idx: int, dim: int) -> np.ndarray:
    """Deterministic unit direction for one sampled model point."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(namespace, radius_idx, model_idx)))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def radius_grid(r_max: float, n_radii: int) -> np.ndarray:
    if r_max < 0.0:
        raise DomainError(f"r_max must be >= 0, got {r_max}")
    if n_radii < 1:
        raise DomainError(f"n_radii must be >= 1, got {n_radii}")
    if r_max == 0.0:
        return np.zeros(1)
    return np.linspace(0.0, r_max, n_radii)


@dataclass(frozen=True)
class LipschitzProfile:
    radii: np.ndarray
    l_avg: np.ndarray
    l_upper: np.ndarray
    grad_l_upper: np.ndarray | None
    n_models: int
    n_pairs: int
    seed: int
    skipped_pairs: int = 0
    cumulative: bool = True

    def rows(self) -> list[dict]:
        out = []
        for i, r in enumerate(self.radii):
            row = {
                "radius": float(r),
                "l_avg": float(self.l_avg[i]),
                "l_upper": float(self.l_upper[i]),
            }
            row["grad_l_upper"] = (
                float(self.grad_l_upper[i]) if self.grad_l_upper is not None else float("nan")
            )
            out.append(row)
        return out


def capture_rmax(trace: TrainTrace) -> float:
    """Largest parameter deviation seen along a training run."""
    if trace.deviation.size == 0:
        raise DomainError("trace is empty")
    return float(trace.deviation.max())


def estimate_lipschitz_profile(
    model,
    theta0,
    data_pairs,
    n_models: int,
    r_max: float,
    n_radii: int,
    seed: int,
    cumulative: bool = True,
) -> LipschitzProfile:
    """Profile of function difference quotients over input pairs, per shell radius."""
    if n_models < 1:
        raise DomainError(f"n_models must be >= 1, got {n_models}")
    pairs = []
    skipped = 0
    for x_a, x_b in data_pairs:
        x_a = np.asarray(x_a, dtype=float)
        x_b = np.asarray(x_b, dtype=float)
        gap = float(np.linalg.norm(x_b - x_a))
        if gap == 0.0:
            skipped += 1
            continue
        pairs.append((x_a, x_b, gap))
    if not pairs:
        raise DomainError("no usable input pairs (all coincident or none given)")

    # One stacked batch: rows 0..m-1 are the first elements, m.. the seconds.
    lhs = np.stack([p[0] for p in pairs])
    rhs = np.stack([p[1] for p in pairs])
    gaps = np.array([p[2] for p in pairs])
    batch = np.vstack([lhs, rhs])
    m = len(pairs)

    radii = radius_grid(r_max, n_radii)
    dim = theta0.dim
    per_model_max: list[float] = []
    l_avg = np.zeros(radii.shape[0])
    l_upper = np.zeros(radii.shape[0])
    for ri, r in enumerate(radii):
        if not cumulative:
            per_model_max = []
        for mi in range(n_models):
            direction = shell_direction(seed, _NS_VALUE, ri, mi, dim)
            theta = theta0.with_values(theta0.values + r * direction)
            f = model.forward(theta, batch)
            ratios = np.abs(f[m:] - f[:m]) / gaps
            per_model_max.append(float(ratios.max()))
        l_avg[ri] = float(np.mean(per_model_max))
        l_upper[ri] = float(np.max(per_model_max))
    return LipschitzProfile(
        radii=radii,
        l_avg=l_avg,
        l_upper=l_upper,
        grad_l_upper=None,
        n_models=n_models,
        n_pairs=m,
        seed=seed,
        skipped_pairs=skipped,
        cumulative=cumulative,
    )


def estimate_grad_lipschitz(
    model,
    theta0,
    X,
    n_models: int,
    r_max: float,
    n_radii: int,
    seed: int,
    cumulative: bool = True,
) -> np.ndarray:
    """Per-radius upper estimate of the Jacobian's parameter sensitivity.

    Ratio per sampled model: ||J(theta) - J(theta0)||_2 / ||theta - theta0||,
    with J the output Jacobian on X. Entries are cumulative maxima up to each
    radius; radius zero contributes no parameter pair, so the first entry is 0.
    """
    if n_models < 1:
        raise DomainError(f"n_models must be >= 1, got {n_models}")
    radii = radius_grid(r_max, n_radii)
    dim = theta0.dim
    j0 = model.jacobian(theta0, X)
    ratios: list[float] = []
    out = np.zeros(radii.shape[0])
    for ri, r in enumerate(radii):
        if not cumulative:
            ratios = []
        if r > 0.0:
            for mi in range(n_models):
                direction = shell_direction(seed, _NS_GRAD, ri, mi, dim)
                theta = theta0.with_values(theta0.values + r * direction)
                diff = model.jacobian(theta, X) - j0
                ratios.append(linalg.operator_norm(diff) / r)
        out[ri] = max(ratios) if ratios else 0.0
    return out


def attach_grad_profile(profile: LipschitzProfile, grad_l_upper: np.ndarray) -> LipschitzProfile:
    if grad_l_upper.shape != profile.radii.shape:
        raise DomainError("gradient profile length does not match the radius grid")
    from dataclasses import replace

    return replace(profile, grad_l_upper=grad_l_upper)
