"""Selectively regularized gradient-descent fine-tuning and its bounds.

Training minimizes the unnormalized squared risk ||f(X) - Y||^2 plus an L2
pull toward the initial parameters, split into a plain gradient step followed
by a shrinkage step. The shrinkage is *selective*: a group of coordinates is
shrunk toward theta0 only when the inner product between the risk gradient
and the offset from theta0, restricted to that group, is nonnegative. The
group granularity is the layer segment by default, with whole-vector and
per-coordinate modes available.

Alongside the real trajectory, ``train`` co-evolves the tangent (linearized)
model under the same update rule with features frozen at theta0, and records
per step: risk, parameter deviation, the gap between the two predictors, a
KL diagnostic between them, and the instantaneous / integrated regularization
actually applied.

Closed-form evaluators for the deviation bound, the linearization-gap bound,
and the critical regularization threshold with its validity horizon live here
too; they are plain functions of the (estimated) Lipschitz constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DomainError, NumericError
from .model import ParamVector

DIVERGENCE_RISK = 1e12
GRANULARITIES = ("segment", "global", "coordinate")

# Inner factor of the linearization-gap constant b. The source derivation
# carries a corrected factor of 4 here (an earlier variant used 2); reports
# echo this value so bound provenance stays visible.
GAP_BOUND_INNER_FACTOR = 4.0


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.0
    step_size: float = 1e-3
    steps: int = 100
    selective: bool = True
    granularity: str = "segment"
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0.0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if not self.step_size > 0.0:
            raise ConfigError(f"step_size must be > 0, got {self.step_size}")
        if self.lam * self.step_size >= 1.0:
            raise ConfigError(
                f"lam * step_size must stay below 1 (got {self.lam * self.step_size})"
            )
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.granularity not in GRANULARITIES:
            raise ConfigError(f"granularity must be one of {GRANULARITIES}")

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "step_size": self.step_size,
            "steps": self.steps,
            "selective": self.selective,
            "granularity": self.granularity,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainConfig":
        return cls(
            lam=float(raw.get("lam", 0.0)),
            step_size=float(raw.get("step_size", 1e-3)),
            steps=int(raw.get("steps", 100)),
            selective=bool(raw.get("selective", True)),
            granularity=raw.get("granularity", "segment"),
            seed=int(raw.get("seed", 0)),
        )


TRACE_COLUMNS = ("step", "t", "risk", "deviation", "lin_gap", "kl", "lambda_t", "Lambda_t")


@dataclass(frozen=True)
class TrainTrace:
    """Per-step record of a training run; row t is the state after t updates.

    ``thetas`` stacks the trainable vectors row-wise. ``lambda_t[t]`` is the
    regularization applied during the update that produced row t (lam if the
    shrinkage fired on at least one group, else 0), and ``Lambda_t`` is its
    running integral sum(lambda_s * step_size). Continuous time for bound
    comparisons is ``t * step_size``.
    """

    thetas: np.ndarray = field(repr=False)
    risk: np.ndarray
    deviation: np.ndarray
    lin_gap: np.ndarray
    kl: np.ndarray
    lambda_t: np.ndarray
    Lambda_t: np.ndarray
    step_size: float
    lam: float
    diverged: bool = False
    aborted_at: int | None = None

    @property
    def n_steps(self) -> int:
        return self.risk.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.risk.shape[0]) * self.step_size

    def rows(self) -> list[dict]:
        out = []
        for t in range(self.risk.shape[0]):
            out.append(
                {
                    "step": t,
                    "t": t * self.step_size,
                    "risk": float(self.risk[t]),
                    "deviation": float(self.deviation[t]),
                    "lin_gap": float(self.lin_gap[t]),
                    "kl": float(self.kl[t]),
                    "lambda_t": float(self.lambda_t[t]),
                    "Lambda_t": float(self.Lambda_t[t]),
                }
            )
        return out


def _group_slices(layer_map, granularity: str, mask: np.ndarray):
    """Index arrays over which the selective inner-product test is evaluated."""
    idx = np.flatnonzero(mask)
    if granularity == "global":
        return [idx]
    if granularity == "coordinate":
        return [np.array([i]) for i in idx]
    groups = []
    for seg in layer_map.segments:
        seg_idx = np.arange(seg.offset, seg.offset + seg.length)
        seg_idx = seg_idx[mask[seg_idx]]
        if seg_idx.size:
            groups.append(seg_idx)
    return groups


def _apply_update(theta, theta0, grad, cfg: TrainConfig, groups):
    """One two-phase update. Returns (new theta values, shrink fired anywhere).

    Phase one is the plain gradient step. Phase two shrinks a group toward
    theta0 when grad . (theta - theta0) >= 0 on that group (evaluated at the
    incoming point, whose gradient phase one already used), or always when
    the selective test is disabled.
    """
    eta = cfg.step_size
    tilde = theta - eta * grad
    if cfg.lam == 0.0:
        return tilde, False
    out = tilde.copy()
    fired = False
    offset0 = theta - theta0
    for idx in groups:
        if cfg.selective and float(grad[idx] @ offset0[idx]) < 0.0:
            continue
        out[idx] = tilde[idx] - cfg.lam * eta * (tilde[idx] - theta0[idx])
        fired = True
    return out, fired


def selective_step(model, theta: ParamVector, theta0: ParamVector, cfg: TrainConfig, data) -> ParamVector:
    """Apply one selectively regularized gradient step to ``theta``."""
    X, Y = data.X, data.Y
    res = model.forward(theta, X) - Y
    jac = model.jacobian(theta, X)
    grad = 2.0 * (jac.T @ res)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite risk gradient")
    mask = np.ones(theta.dim, dtype=bool)
    groups = _group_slices(theta.layer_map, cfg.granularity, mask)
    new_values, _ = _apply_update(theta.values, theta0.values, grad, cfg, groups)
    return theta.with_values(new_values)


def train(model, theta0: ParamVector, cfg: TrainConfig, data, trainable=None) -> TrainTrace:
    """Run fine-tuning and co-evolve the tangent model under the same rule.

    The tangent trajectory uses features frozen at theta0: its predictor is
    f(theta0) + J0 (theta_bar - theta0) and its risk gradient flows through
    J0 only. ``trainable`` optionally restricts updates (both trajectories)
    to a set of segment ids; everything else stays frozen at theta0.

    Aborts with a flagged partial trace when the risk exceeds 1e12.
    """
    X, Y = data.X, data.Y
    p = theta0.dim
    mask = np.ones(p, dtype=bool)
    if trainable is not None:
        names = list(trainable)
        if not names:
            raise DomainError("trainable must name at least one segment")
        mask = np.zeros(p, dtype=bool)
        for name in names:
            mask[theta0.layer_map.segment(name).sl] = True
    groups = _group_slices(theta0.layer_map, cfg.granularity, mask)

    f0 = model.forward(theta0, X)
    j0 = model.jacobian(theta0, X)

    theta = theta0.values.copy()
    theta_bar = theta0.values.copy()

    n_rows = cfg.steps + 1
    thetas = np.zeros((n_rows, p))
    risk = np.zeros(n_rows)
    deviation = np.zeros(n_rows)
    lin_gap = np.zeros(n_rows)
    kl = np.zeros(n_rows)
    lambda_t = np.zeros(n_rows)
    Lambda_t = np.zeros(n_rows)

    diverged = False
    aborted_at = None
    rows_written = 0
    running_Lambda = 0.0

    for t in range(n_rows):
        pv = theta0.with_values(theta)
        f = model.forward(pv, X)
        f_bar = f0 + j0 @ (theta_bar - theta0.values)
        r = float(np.sum((f - Y) ** 2))

        thetas[t] = theta
        risk[t] = r
        deviation[t] = float(np.linalg.norm(theta - theta0.values))
        lin_gap[t] = float(np.linalg.norm(f - f_bar))
        kl[t] = kl_metric(f, f_bar)
        Lambda_t[t] = running_Lambda
        rows_written = t + 1

        if not math.isfinite(r) or r > DIVERGENCE_RISK:
            diverged = True
            aborted_at = t
            break
        if t == cfg.steps:
            break

        jac = model.jacobian(pv, X)
        grad = 2.0 * (jac.T @ (f - Y))
        grad_bar = 2.0 * (j0.T @ (f_bar - Y))
        grad[~mask] = 0.0
        grad_bar[~mask] = 0.0
        if not np.all(np.isfinite(grad)):
            raise NumericError("non-finite risk gradient", step=t)

        theta, fired = _apply_update(theta, theta0.values, grad, cfg, groups)
        theta_bar, _ = _apply_update(theta_bar, theta0.values, grad_bar, cfg, groups)

        lam_applied = cfg.lam if fired else 0.0
        lambda_t[t + 1] = lam_applied
        running_Lambda += lam_applied * cfg.step_size

    sl = slice(0, rows_written)
    return TrainTrace(
        thetas=thetas[sl],
        risk=risk[sl],
        deviation=deviation[sl],
        lin_gap=lin_gap[sl],
        kl=kl[sl],
        lambda_t=lambda_t[sl],
        Lambda_t=Lambda_t[sl],
        step_size=cfg.step_size,
        lam=cfg.lam,
        diverged=diverged,
        aborted_at=aborted_at,
    )


# -- closed-form bound evaluators ---------------------------------------------


def theta_deviation_bound(lip_f: float, init_residual: float, lam: float, t):
    """Deviation bound 2 Lip(f) ||f0(X) - Y|| (1 - e^(-lam t)) / lam.

    At lam = 0 this is the linear-in-time limit 2 Lip(f) ||f0(X) - Y|| t.
    Accepts scalar or array ``t``.
    """
    if lip_f < 0.0 or init_residual < 0.0 or lam < 0.0:
        raise DomainError("lip_f, init_residual and lam must be nonnegative")
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0):
        raise DomainError("t must be nonnegative")
    amp = 2.0 * lip_f * init_residual
    if lam == 0.0:
        out = amp * tt
    else:
        out = amp * (1.0 - np.exp(-lam * tt)) / lam
    return float(out) if np.isscalar(t) else out


def gap_bound_constant(lip_f: float, lip_grad_f: float, init_residual: float, lam: float) -> float:
    """The constant b scaling the linearization-gap bound."""
    if lam <= 0.0:
        raise DomainError("the linearization-gap bound needs lam > 0 (unbounded regime at lam = 0)")
    if lip_f < 0.0 or lip_grad_f < 0.0 or init_residual < 0.0:
        raise DomainError("Lipschitz constants and residual must be nonnegative")
    return (
        2.0
        * lip_f**2
        * init_residual
        * (GAP_BOUND_INNER_FACTOR / lam * lip_grad_f * init_residual + 1.0)
    )


def linearization_gap_bound(lip_f: float, lip_grad_f: float, init_residual: float, lam: float, t):
    """Gap bound b (t - (1 - e^(-lam t)) / lam); zero at t = 0, nondecreasing."""
    b = gap_bound_constant(lip_f, lip_grad_f, init_residual, lam)
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0.0):
        raise DomainError("t must be nonnegative")
    out = b * (tt - (1.0 - np.exp(-lam * tt)) / lam)
    out = np.maximum(out, 0.0)  # guard roundoff at tiny t
    return float(out) if np.isscalar(t) else out


def lambda_circ_and_horizon(lip_f: float, init_residual: float, r: float, lam: float) -> tuple[float, float]:
    """Critical regularization 2 ||f0(X) - Y|| Lip(f) / r and validity horizon.

    For lam >= lambda_circ the trajectory provably stays inside the radius-r
    ball forever (infinite horizon); below it, only up to
    (1/lam) ln(1 / (1 - lam/lambda_circ)). The lam = 0 horizon is the
    continuous limit 1 / lambda_circ.
    """
    if not r > 0.0:
        raise DomainError(f"ball radius r must be positive, got {r}")
    if lip_f < 0.0 or init_residual < 0.0 or lam < 0.0:
        raise DomainError("lip_f, init_residual and lam must be nonnegative")
    lam_circ = 2.0 * init_residual * lip_f / r
    if lam >= lam_circ:
        return lam_circ, math.inf
    if lam == 0.0:
        return lam_circ, 1.0 / lam_circ
    return lam_circ, math.log(1.0 / (1.0 - lam / lam_circ)) / lam


# -- diagnostics ---------------------------------------------------------------


def kl_metric(f_outputs, fbar_outputs) -> float:
    """Mean KL between the two-logit softmaxes [f_i, 0] and [fbar_i, 0].

    This is the minimal binary analog of a prediction-divergence diagnostic
    for scalar heads: each output becomes a Bernoulli with success logit f_i.
    Nonnegative; exactly zero when the outputs coincide.
    """
    a = np.asarray(f_outputs, dtype=float)
    b = np.asarray(fbar_outputs, dtype=float)
    if a.shape != b.shape:
        raise DomainError(f"output shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    # log sigmoid(x) = -softplus(-x), log(1 - sigmoid(x)) = -softplus(x)
    p = 0.5 * (1.0 + np.tanh(0.5 * a))
    log_p, log_1p = -np.logaddexp(0.0, -a), -np.logaddexp(0.0, a)
    log_q, log_1q = -np.logaddexp(0.0, -b), -np.logaddexp(0.0, b)
    kl = p * (log_p - log_q) + (1.0 - p) * (log_1p - log_1q)
    return float(np.mean(np.maximum(kl, 0.0)))


class MonotonicityResult(NamedTuple):
    ok: bool
    first_violation: int | None


def monotonicity_check(trace: TrainTrace, slack_scale: float = 1e-8) -> MonotonicityResult:
    """Check risk[t+1] <= risk[t] + slack with slack = slack_scale (1 + risk[t])."""
    risk = trace.risk
    for t in range(risk.shape[0] - 1):
        if risk[t + 1] > risk[t] + slack_scale * (1.0 + risk[t]):
            return MonotonicityResult(False, t)
    return MonotonicityResult(True, None)


# -- bound report ---------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound curves for one training run, from estimated constants.

    ``lip_k`` is derived as 2 lip_f lip_grad_f (the product rule for the
    kernel's parameter sensitivity). ``gap_inner_factor`` echoes the constant
    baked into b. Curves are aligned with the trace's step grid; the gap
    curve is None in the unbounded lam = 0 regime.
    """

    lip_f: float
    lip_grad_f: float
    lip_k: float
    b: float | None
    lambda_circ: float | None
    horizon: float | None
    theta_bound_curve: np.ndarray
    gap_bound_curve: np.ndarray | None
    init_residual: float
    radius: float | None
    gap_inner_factor: float = GAP_BOUND_INNER_FACTOR
    constants_source: str = "estimated"


def build_bound_report(
    trace: TrainTrace,
    lip_f: float,
    lip_grad_f: float,
    init_residual: float,
    radius: float | None = None,
) -> BoundReport:
    """Evaluate the deviation / gap bounds along a trace's time grid.

    ``radius`` is the ball radius where the Lipschitz estimates hold
    (typically the largest observed deviation); it feeds the critical
    regularization threshold and horizon. Pass None when the trajectory
    never moved.
    """
    times = trace.times
    lam = trace.lam
    theta_curve = theta_deviation_bound(lip_f, init_residual, lam, times)
    if lam > 0.0:
        b = gap_bound_constant(lip_f, lip_grad_f, init_residual, lam)
        gap_curve = linearization_gap_bound(lip_f, lip_grad_f, init_residual, lam, times)
    else:
        b = None
        gap_curve = None
    lam_circ = horizon = None
    if radius is not None and radius > 0.0:
        lam_circ, horizon = lambda_circ_and_horizon(lip_f, init_residual, radius, lam)
    return BoundReport(
        lip_f=lip_f,
        lip_grad_f=lip_grad_f,
        lip_k=2.0 * lip_f * lip_grad_f,
        b=b,
        lambda_circ=lam_circ,
        horizon=horizon,
        theta_bound_curve=theta_curve,
        gap_bound_curve=gap_curve,
        init_residual=init_residual,
        radius=radius,
    )
