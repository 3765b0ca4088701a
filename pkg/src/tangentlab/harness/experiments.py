"""Experiment orchestration: configs, runners, and report assembly.

Each experiment kind consumes an :class:`ExperimentConfig`, runs the relevant
modules, and emits delimited reports (plus figures unless disabled). All
randomness derives from the config's root seed through named children, so a
fixed config reproduces byte-identical CSV bodies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import dynamics, lipschitz, ntk, spectral
from ..errors import ConfigError, DomainError
from ..linalg import cond_number
from ..model import MLP, ModelConfig, ParamVector, build_model
from . import plots
from .datasets import Dataset, gen_dataset, load_csv, sample_pairs, split_train_eval
from .reports import emit_report, provenance_block
from .seeding import child_seed, rng_for

LAMBDA_GRID = (0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0)
SKETCH_SEEDS = (42, 123, 7, 99, 2024)
EXPERIMENT_KINDS = (
    "sweep-lambda",
    "verify-bounds",
    "ntk-report",
    "select-layers",
    "lipschitz",
    "sketch-robustness",
)

# Numeric guard for containment comparisons: measured <= bound is a theorem,
# the epsilon only absorbs float roundoff in evaluating both sides.
CONTAIN_EPS = 1e-12


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "teacher-regression"
    n: int | None = None
    d: int = 4
    noise: float = 0.05
    seed: int | None = None
    path: str | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "d": self.d,
            "noise": self.noise,
            "seed": self.seed,
            "path": self.path,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetSpec":
        return cls(
            kind=raw.get("kind", "teacher-regression"),
            n=None if raw.get("n") is None else int(raw["n"]),
            d=int(raw.get("d", 4)),
            noise=float(raw.get("noise", 0.05)),
            seed=None if raw.get("seed") is None else int(raw["seed"]),
            path=raw.get("path"),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 7
    sigma: float = 1e-4
    out: str = "out"
    fmt: str = "csv"
    plots: bool = True
    model: ModelConfig | None = None
    train: dynamics.TrainConfig = dynamics.TrainConfig(lam=1.0, step_size=1e-3, steps=400)
    dataset: DatasetSpec = DatasetSpec()
    lambda_grid: tuple[float, ...] = LAMBDA_GRID
    sweep_seeds: int = 3
    bound_lams: tuple[float, ...] = (1.0, 5.0)
    lipschitz_models: int = 100
    lipschitz_pairs: int = 1000
    lipschitz_radii: int = 10
    sketch_m: int = 32
    sketch_seeds: tuple[int, ...] = SKETCH_SEEDS
    select_max_subset: int = 3
    select_base_layer: int | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENT_KINDS}"
            )
        if not self.sigma > 0.0:
            raise ConfigError(f"sigma must be positive, got {self.sigma}")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.fmt!r}")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "sigma": self.sigma,
            "out": str(self.out),
            "format": self.fmt,
            "plots": self.plots,
            "model": None if self.model is None else self.model.to_dict(),
            "train": self.train.to_dict(),
            "dataset": self.dataset.to_dict(),
            "lambda_grid": list(self.lambda_grid),
            "sweep_seeds": self.sweep_seeds,
            "bound_lams": list(self.bound_lams),
            "lipschitz": {
                "n_models": self.lipschitz_models,
                "n_pairs": self.lipschitz_pairs,
                "n_radii": self.lipschitz_radii,
            },
            "sketch": {"m": self.sketch_m, "seeds": list(self.sketch_seeds)},
            "select": {
                "max_subset_size": self.select_max_subset,
                "base_layer": self.select_base_layer,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict, **overrides) -> "ExperimentConfig":
        lip = raw.get("lipschitz", {})
        sketch = raw.get("sketch", {})
        select = raw.get("select", {})
        cfg = cls(
            experiment=raw["experiment"],
            seed=int(raw.get("seed", 7)),
            sigma=float(raw.get("sigma", 1e-4)),
            out=raw.get("out", "out"),
            fmt=raw.get("format", "csv"),
            plots=bool(raw.get("plots", True)),
            model=None if raw.get("model") is None else ModelConfig.from_dict(raw["model"]),
            train=dynamics.TrainConfig.from_dict(raw.get("train", {"lam": 1.0, "steps": 400})),
            dataset=DatasetSpec.from_dict(raw.get("dataset", {})),
            lambda_grid=tuple(float(v) for v in raw.get("lambda_grid", LAMBDA_GRID)),
            sweep_seeds=int(raw.get("sweep_seeds", 3)),
            bound_lams=tuple(float(v) for v in raw.get("bound_lams", (1.0, 5.0))),
            lipschitz_models=int(lip.get("n_models", 100)),
            lipschitz_pairs=int(lip.get("n_pairs", 1000)),
            lipschitz_radii=int(lip.get("n_radii", 10)),
            sketch_m=int(sketch.get("m", 32)),
            sketch_seeds=tuple(int(s) for s in sketch.get("seeds", SKETCH_SEEDS)),
            select_max_subset=int(select.get("max_subset_size", 3)),
            select_base_layer=(
                None if select.get("base_layer") is None else int(select["base_layer"])
            ),
        )
        return replace(cfg, **overrides) if overrides else cfg


# -- shared assembly -----------------------------------------------------------


def _resolve_dataset(cfg: ExperimentConfig) -> Dataset:
    spec = cfg.dataset
    if spec.path is not None:
        return load_csv(spec.path)
    default_n = 1000 if cfg.experiment == "sketch-robustness" else 48
    n = spec.n if spec.n is not None else default_n
    seed = spec.seed if spec.seed is not None else child_seed(cfg.seed, "dataset")
    return gen_dataset(spec.kind, n, spec.d, spec.noise, seed)


def _resolve_model(cfg: ExperimentConfig, data: Dataset, seed_label="model") -> tuple[MLP, ParamVector]:
    if cfg.model is not None:
        mc = cfg.model
        if mc.input_dim != data.d:
            raise ConfigError(
                f"model input_dim {mc.input_dim} does not match dataset d={data.d}"
            )
    else:
        hidden = (5, 5, 5) if cfg.experiment == "select-layers" else (8,)
        mc = ModelConfig(
            input_dim=data.d,
            hidden_widths=hidden,
            activation="tanh",
            seed=child_seed(cfg.seed, seed_label),
        )
    return build_model(mc)


def _spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""

    def ranks(v):
        v = np.asarray(v, dtype=float)
        order = np.argsort(v, kind="stable")
        r = np.empty(v.shape[0])
        r[order] = np.arange(1, v.shape[0] + 1)
        for value in np.unique(v):
            mask = v == value
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(x), ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0.0:
        return 0.0
    return float(rx @ ry) / denom


def _risk(values: np.ndarray, targets: np.ndarray) -> float:
    return float(np.sum((values - targets) ** 2))


# -- runners --------------------------------------------------------------------

SWEEP_COLUMNS = (
    "seed_index",
    "lambda",
    "final_deviation",
    "final_lin_gap",
    "final_kl",
    "train_risk",
    "train_risk_mean",
    "eval_risk",
    "eval_risk_mean",
    "diverged",
)


def run_sweep_lambda(cfg: ExperimentConfig):
    rows = []
    summaries = []
    for si in range(cfg.sweep_seeds):
        data_seed = (
            cfg.dataset.seed
            if cfg.dataset.seed is not None
            else child_seed(cfg.seed, "sweep-data", si)
        )
        data = _resolve_dataset(replace(cfg, dataset=replace(cfg.dataset, seed=data_seed)))
        train_ds, eval_ds = split_train_eval(data)
        model_cfg = cfg.model or ModelConfig(
            input_dim=data.d,
            hidden_widths=(8,),
            activation="tanh",
            seed=child_seed(cfg.seed, "sweep-model", si),
        )
        model, theta0 = build_model(model_cfg)
        for lam in cfg.lambda_grid:
            tc = replace(cfg.train, lam=lam)
            trace = dynamics.train(model, theta0, tc, train_ds)
            theta_T = theta0.with_values(trace.thetas[-1])
            eval_pred = model.forward(theta_T, eval_ds.X)
            rows.append(
                {
                    "seed_index": si,
                    "lambda": lam,
                    "final_deviation": trace.deviation[-1],
                    "final_lin_gap": trace.lin_gap[-1],
                    "final_kl": trace.kl[-1],
                    "train_risk": trace.risk[-1],
                    "train_risk_mean": trace.risk[-1] / train_ds.n,
                    "eval_risk": _risk(eval_pred, eval_ds.Y),
                    "eval_risk_mean": _risk(eval_pred, eval_ds.Y) / eval_ds.n,
                    "diverged": trace.diverged,
                }
            )
        per_seed = [r for r in rows if r["seed_index"] == si]
        lams = [r["lambda"] for r in per_seed]
        summaries.append(
            {
                "seed_index": si,
                "spearman_lin_gap_vs_lambda": _spearman(
                    lams, [r["final_lin_gap"] for r in per_seed]
                ),
                "spearman_deviation_vs_lambda": _spearman(
                    lams, [r["final_deviation"] for r in per_seed]
                ),
            }
        )
    return rows, summaries


VERIFY_STEP_COLUMNS = (
    "lambda",
    "step",
    "t",
    "deviation",
    "theta_bound",
    "dev_ok",
    "lin_gap",
    "gap_bound",
    "within_horizon",
    "gap_checked",
    "gap_ok",
)

VERIFY_SUMMARY_COLUMNS = (
    "lambda",
    "steps",
    "r_max",
    "init_residual",
    "lip_f",
    "lip_grad_f",
    "lip_k",
    "b",
    "lambda_circ",
    "horizon",
    "deviation_bound_pass",
    "gap_bound_pass",
    "gap_steps_checked",
)


def _bounds_for_run(cfg: ExperimentConfig, model, theta0, train_ds, lam: float):
    tc = replace(cfg.train, lam=lam)
    trace = dynamics.train(model, theta0, tc, train_ds)
    r_max = lipschitz.capture_rmax(trace)
    pairs = sample_pairs(train_ds.X, cfg.lipschitz_pairs, rng_for(cfg.seed, "pairs", lam))
    lip_seed = child_seed(cfg.seed, "lipschitz", lam)
    profile = lipschitz.estimate_lipschitz_profile(
        model, theta0, pairs, cfg.lipschitz_models, r_max, cfg.lipschitz_radii, lip_seed
    )
    grad_prof = lipschitz.estimate_grad_lipschitz(
        model, theta0, train_ds.X, cfg.lipschitz_models, r_max, cfg.lipschitz_radii, lip_seed
    )
    profile = lipschitz.attach_grad_profile(profile, grad_prof)
    lip_f = float(profile.l_upper[-1])
    lip_grad_f = float(grad_prof[-1])
    init_residual = math.sqrt(float(trace.risk[0]))
    report = dynamics.build_bound_report(
        trace, lip_f, lip_grad_f, init_residual, radius=r_max if r_max > 0 else None
    )
    return trace, profile, report


def run_verify_bounds(cfg: ExperimentConfig):
    data = _resolve_dataset(cfg)
    train_ds, _ = split_train_eval(data)
    model, theta0 = _resolve_model(cfg, data)
    step_rows, summary_rows = [], []
    curves = {}
    for lam in cfg.bound_lams:
        if lam <= 0.0:
            raise DomainError("verify-bounds needs lam > 0 (gap bound is undefined at lam = 0)")
        trace, profile, report = _bounds_for_run(cfg, model, theta0, train_ds, lam)
        horizon = report.horizon if report.horizon is not None else math.inf
        dev_all_ok = True
        gap_all_ok = True
        gap_checked_count = 0
        for t in range(trace.risk.shape[0]):
            tc = trace.times[t]
            theta_bound = float(report.theta_bound_curve[t])
            dev_ok = trace.deviation[t] <= theta_bound + CONTAIN_EPS * (1.0 + theta_bound)
            within = tc <= horizon * (1.0 + CONTAIN_EPS)
            gap_bound = float(report.gap_bound_curve[t])
            checked = bool(within)
            gap_ok = (not checked) or trace.lin_gap[t] <= gap_bound + CONTAIN_EPS * (1.0 + gap_bound)
            dev_all_ok &= bool(dev_ok)
            gap_all_ok &= bool(gap_ok)
            gap_checked_count += int(checked)
            step_rows.append(
                {
                    "lambda": lam,
                    "step": t,
                    "t": tc,
                    "deviation": trace.deviation[t],
                    "theta_bound": theta_bound,
                    "dev_ok": bool(dev_ok),
                    "lin_gap": trace.lin_gap[t],
                    "gap_bound": gap_bound,
                    "within_horizon": bool(within),
                    "gap_checked": checked,
                    "gap_ok": bool(gap_ok),
                }
            )
        summary_rows.append(
            {
                "lambda": lam,
                "steps": trace.n_steps,
                "r_max": lipschitz.capture_rmax(trace),
                "init_residual": report.init_residual,
                "lip_f": report.lip_f,
                "lip_grad_f": report.lip_grad_f,
                "lip_k": report.lip_k,
                "b": report.b,
                "lambda_circ": report.lambda_circ,
                "horizon": report.horizon,
                "deviation_bound_pass": bool(dev_all_ok),
                "gap_bound_pass": bool(gap_all_ok),
                "gap_steps_checked": gap_checked_count,
            }
        )
        curves[lam] = (trace, report)
    return step_rows, summary_rows, curves


NTK_REPORT_COLUMNS = (
    "subset",
    "n_params",
    "lambda_min",
    "lambda_max",
    "cond_number",
    "eta_vs_rest",
    "train_risk",
    "train_risk_mean",
    "eval_risk",
    "eval_risk_mean",
    "zero_jacobian",
)


def run_ntk_report(cfg: ExperimentConfig):
    data = _resolve_dataset(cfg)
    train_ds, eval_ds = split_train_eval(data)
    model, theta0 = _resolve_model(cfg, data)
    layer_map = model.layer_map
    units = [(f"layer{l}", layer_map.segments_of_layer(l)) for l in layer_map.layers]
    units.append(("full", layer_map.ids))
    full_kernel = ntk.empirical_ntk(model, theta0, train_ds.X)
    rows = []
    for label, subset in units:
        k = ntk.empirical_ntk(model, theta0, train_ds.X, subset)
        reg = ntk.fit_kernel_regression(k, train_ds.Y, cfg.sigma, train_inputs=train_ds.X)
        eval_pred = ntk.predict(reg, model, theta0, eval_ds.X)
        train_risk = ntk.projected_training_risk(k, train_ds.Y, cfg.sigma)
        if label == "full":
            eta_val = float("nan")
        else:
            # perturbation magnitude of this layer against the others combined
            rest = ntk.KernelMatrix(full_kernel.matrix - k.matrix)
            eta_val = spectral.eta(rest, k)
        rows.append(
            {
                "subset": label,
                "n_params": sum(layer_map.segment(s).length for s in subset),
                "lambda_min": k.lambda_min,
                "lambda_max": k.lambda_max,
                "cond_number": cond_number(k, cfg.sigma),
                "eta_vs_rest": eta_val,
                "train_risk": train_risk,
                "train_risk_mean": train_risk / train_ds.n,
                "eval_risk": _risk(eval_pred, eval_ds.Y),
                "eval_risk_mean": _risk(eval_pred, eval_ds.Y) / eval_ds.n,
                "zero_jacobian": k.provenance.zero_jacobian,
            }
        )
    return rows


SELECT_COLUMNS = (
    "subset",
    "size",
    "r_c",
    "eta",
    "inactive",
    "chosen",
    "post_train_risk",
    "post_train_risk_mean",
    "post_eval_risk",
    "post_eval_risk_mean",
)


def run_select_layers(cfg: ExperimentConfig):
    data = _resolve_dataset(cfg)
    train_ds, eval_ds = split_train_eval(data)
    model, theta0 = _resolve_model(cfg, data)
    layer_map = model.layer_map
    layers = list(layer_map.layers)
    base_layer = cfg.select_base_layer if cfg.select_base_layer is not None else layers[-1]
    if base_layer not in layers:
        raise ConfigError(f"base layer {base_layer} not in trainable layers {layers}")
    candidate_layers = [l for l in layers if l != base_layer]
    if not candidate_layers:
        raise ConfigError("select-layers needs at least one non-base layer")
    base_subset = layer_map.segments_of_layer(base_layer)
    k_base = ntk.empirical_ntk(model, theta0, train_ds.X, base_subset)
    candidates = [
        ntk.empirical_ntk(model, theta0, train_ds.X, layer_map.segments_of_layer(l))
        for l in candidate_layers
    ]
    selection = spectral.select_layers(k_base, candidates, cfg.sigma, cfg.select_max_subset)

    rows = []

    def post_risks(trainable):
        trace = dynamics.train(model, theta0, cfg.train, train_ds, trainable=trainable)
        theta_T = theta0.with_values(trace.thetas[-1])
        eval_pred = model.forward(theta_T, eval_ds.X)
        return float(trace.risk[-1]), _risk(eval_pred, eval_ds.Y)

    base_train, base_eval = post_risks(list(base_subset))
    rows.append(
        {
            "subset": "base",
            "size": 0,
            "r_c": 1.0,
            "eta": 0.0,
            "inactive": False,
            "chosen": False,
            "post_train_risk": base_train,
            "post_train_risk_mean": base_train / train_ds.n,
            "post_eval_risk": base_eval,
            "post_eval_risk_mean": base_eval / eval_ds.n,
        }
    )
    for subset, r_c in selection.scores:
        label = "+".join(str(candidate_layers[i]) for i in subset)
        s_sum = candidates[subset[0]].matrix.copy()
        for i in subset[1:]:
            s_sum = s_sum + candidates[i].matrix
        eta_val = spectral.eta(k_base, ntk.KernelMatrix(s_sum))
        trainable = list(base_subset)
        for i in subset:
            trainable.extend(layer_map.segments_of_layer(candidate_layers[i]))
        tr_risk, ev_risk = post_risks(trainable)
        rows.append(
            {
                "subset": label,
                "size": len(subset),
                "r_c": r_c,
                "eta": eta_val,
                "inactive": any(i in selection.inactive for i in subset),
                "chosen": subset == selection.chosen,
                "post_train_risk": tr_risk,
                "post_train_risk_mean": tr_risk / train_ds.n,
                "post_eval_risk": ev_risk,
                "post_eval_risk_mean": ev_risk / eval_ds.n,
            }
        )
    chosen_label = "+".join(str(candidate_layers[i]) for i in selection.chosen)
    return rows, selection, chosen_label, base_layer


LIPSCHITZ_COLUMNS = ("radius", "l_avg", "l_upper", "grad_l_upper")


def run_lipschitz(cfg: ExperimentConfig):
    data = _resolve_dataset(cfg)
    train_ds, _ = split_train_eval(data)
    model, theta0 = _resolve_model(cfg, data)
    trace = dynamics.train(model, theta0, cfg.train, train_ds)
    r_max = lipschitz.capture_rmax(trace)
    pairs = sample_pairs(train_ds.X, cfg.lipschitz_pairs, rng_for(cfg.seed, "pairs"))
    lip_seed = child_seed(cfg.seed, "lipschitz")
    profile = lipschitz.estimate_lipschitz_profile(
        model, theta0, pairs, cfg.lipschitz_models, r_max, cfg.lipschitz_radii, lip_seed
    )
    grad_prof = lipschitz.estimate_grad_lipschitz(
        model, theta0, train_ds.X, cfg.lipschitz_models, r_max, cfg.lipschitz_radii, lip_seed
    )
    profile = lipschitz.attach_grad_profile(profile, grad_prof)
    return profile.rows(), profile, r_max


SKETCH_COLUMNS = ("seed", "m", "n", "lambda_min", "lambda_max", "cond_number")


def run_sketch_robustness(cfg: ExperimentConfig):
    data = _resolve_dataset(cfg)
    model, theta0 = _resolve_model(cfg, data)
    rows = []
    conds = []
    for seed in cfg.sketch_seeds:
        k = ntk.sketch_ntk(model, theta0, data, cfg.sketch_m, seed)
        cond = cond_number(k, cfg.sigma)
        conds.append(cond)
        rows.append(
            {
                "seed": seed,
                "m": cfg.sketch_m,
                "n": data.n,
                "lambda_min": k.lambda_min,
                "lambda_max": k.lambda_max,
                "cond_number": cond,
            }
        )
    conds = np.array(conds)
    dispersion = {
        "mean_cond": float(conds.mean()),
        "std_cond": float(conds.std(ddof=1)) if conds.size > 1 else 0.0,
        "coefficient_of_variation": (
            float(conds.std(ddof=1) / conds.mean()) if conds.size > 1 and conds.mean() != 0 else 0.0
        ),
        "n_seeds": int(conds.size),
    }
    return rows, dispersion


# -- top-level dispatch ----------------------------------------------------------


def run_experiment(cfg: ExperimentConfig) -> list[Path]:
    """Run one experiment and write its report files. Returns written paths."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    base_cfg = cfg.to_dict()
    written: list[Path] = []

    def prov(**extra):
        return provenance_block(cfg.seed, cfg.sigma, base_cfg, **extra)

    kind = cfg.experiment
    if kind == "sweep-lambda":
        rows, summaries = run_sweep_lambda(cfg)
        written += emit_report(
            rows,
            SWEEP_COLUMNS,
            out / "sweep_lambda",
            cfg.fmt,
            prov(lambda_grid=list(cfg.lambda_grid), rank_correlations=summaries,
                 note="eval_risk replaces the accuracy column on held-out 20%"),
        )
        if cfg.plots:
            written.append(plots.plot_sweep(rows, out / "sweep_lambda.png"))
    elif kind == "verify-bounds":
        step_rows, summary_rows, curves = run_verify_bounds(cfg)
        written += emit_report(
            step_rows, VERIFY_STEP_COLUMNS, out / "verify_bounds_steps", cfg.fmt,
            prov(constants_source="estimated"),
        )
        written += emit_report(
            summary_rows, VERIFY_SUMMARY_COLUMNS, out / "verify_bounds_summary", cfg.fmt,
            prov(constants_source="estimated"),
        )
        if cfg.plots:
            for lam, (trace, report) in curves.items():
                written.append(
                    plots.plot_bounds(trace, report, out / f"verify_bounds_lam{lam:g}.png")
                )
    elif kind == "ntk-report":
        rows = run_ntk_report(cfg)
        written += emit_report(rows, NTK_REPORT_COLUMNS, out / "ntk_report", cfg.fmt, prov())
        if cfg.plots:
            written.append(plots.plot_ntk_report(rows, out / "ntk_report.png"))
    elif kind == "select-layers":
        rows, selection, chosen_label, base_layer = run_select_layers(cfg)
        written += emit_report(
            rows, SELECT_COLUMNS, out / "select_layers", cfg.fmt,
            prov(chosen=chosen_label, base_layer=base_layer,
                 inactive_candidates=list(selection.inactive)),
        )
        if cfg.plots:
            written.append(plots.plot_select(rows, out / "select_layers.png"))
    elif kind == "lipschitz":
        rows, profile, r_max = run_lipschitz(cfg)
        written += emit_report(
            rows, LIPSCHITZ_COLUMNS, out / "lipschitz_profile", cfg.fmt,
            prov(r_max=r_max, n_models=profile.n_models, n_pairs=profile.n_pairs,
                 skipped_pairs=profile.skipped_pairs, cumulative=profile.cumulative,
                 constants_source="estimated"),
        )
        if cfg.plots:
            written.append(plots.plot_profile(rows, out / "lipschitz_profile.png"))
    elif kind == "sketch-robustness":
        rows, dispersion = run_sketch_robustness(cfg)
        written += emit_report(
            rows, SKETCH_COLUMNS, out / "sketch_robustness", cfg.fmt, prov(**dispersion)
        )
        if cfg.plots:
            written.append(plots.plot_sketch(rows, out / "sketch_robustness.png"))
    else:  # pragma: no cover - guarded in __post_init__
        raise ConfigError(f"unknown experiment {kind!r}")
    return written
