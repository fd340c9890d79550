"""Command-line interface.

Commands: ``fit``, ``sample``, ``gof``, ``qqplot``, ``logprob-plot``,
``simulate-convergence``, ``drawdowns``.  Options come from a YAML config
file plus command-line overrides (flags > file > defaults).  All outputs are
deterministic given config and seed, comma-separated with a header row, and
written atomically (temp file + rename).

Exit codes: 1 = input/output error, 2 = configuration error, 3 = solver or
numerical error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import yaml

from . import basis as _basis
from . import data as _data
from . import design as _design
from . import metrics as _metrics
from . import solve as _solve
from .errors import (
    CatalogError,
    ConfigError,
    DataError,
    DomainError,
    ParameterError,
    QuantmixError,
    SolverError,
)
from .model import FittedModel

__all__ = ["main", "RunConfig"]

SEED_ENV_VAR = "QUANTMIX_SEED"

# Downscaled defaults for the convergence experiment; --full restores the
# original 11x11 skewed-t grid, 9 sizes and 100 repetitions.
_GAMMAS_FULL = [1 / 2, 1 / 1.8, 1 / 1.6, 1 / 1.4, 1 / 1.2, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0]
_NUS_FULL = [float(v) for v in range(5, 26, 2)]
_EXPONENTS_FULL = [2.0 + 0.25 * k for k in range(9)]
_GAMMAS_SMALL = [1 / 2, 1 / 1.6, 1 / 1.2, 1.2, 1.6, 2.0]
_NUS_SMALL = [5.0, 15.0]
_EXPONENTS_SMALL = [2.0, 3.0, 4.0]

_DEFAULT_CATALOG = {
    "families": [
        {"kind": "normal"},
        {"kind": "exponential"},
        {"kind": "student_t", "nu": [5.0, 20.0]},
    ]
}


@dataclass
class RunConfig:
    """Merged run configuration: command, file settings, flag overrides."""

    command: str
    catalog: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def build(cls, args: argparse.Namespace) -> "RunConfig":
        file_cfg: dict = {}
        if getattr(args, "config", None):
            file_cfg = _load_config_file(args.config)
        cfg = cls(
            command=args.command,
            catalog=file_cfg.get("catalog") or {},
            fit=dict(file_cfg.get("fit") or {}),
            experiment=dict(file_cfg.get("experiment") or {}),
        )
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                cfg.seed = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from exc
        if "seed" in file_cfg:
            cfg.seed = int(file_cfg["seed"])
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        for key in ("error", "weights", "scheme", "shrink_band", "cardinality", "node_cap"):
            val = getattr(args, key.replace("-", "_"), None)
            if val is not None:
                cfg.fit[key] = val
        if getattr(args, "nonneg", None) is not None:
            cfg.fit["nonneg"] = args.nonneg
        return cfg


def _load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError:
        raise
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


# ---------------------------------------------------------------------------
# deterministic output helpers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _atomic_write(path: str, text: str) -> None:
    """Write-to-temp-then-rename so failures never leave partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".quantmix-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_table(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------


def _build_catalog(cfg: RunConfig) -> list[_basis.BasisFunction]:
    spec = cfg.catalog if cfg.catalog else _DEFAULT_CATALOG
    return _basis.make_catalog(spec)


def _build_scheme(fit_cfg: dict) -> _design.PlottingScheme:
    kind = fit_cfg.get("scheme", "standard")
    if kind == "fixed-levels":
        levels = fit_cfg.get("levels")
        if not levels:
            raise ConfigError("fixed-levels scheme requires 'levels' in the fit block")
        return _design.PlottingScheme(kind=kind, levels=tuple(float(v) for v in levels))
    if kind == "shrunk":
        return _design.PlottingScheme(kind=kind, shrink_band=float(fit_cfg.get("shrink_band", 0.01)))
    return _design.PlottingScheme(kind=kind)


def _build_weights(fit_cfg: dict) -> _design.WeightSpec:
    kind = fit_cfg.get("weights", "equal")
    alias = {
        "equal": "equal",
        "plugin-normal": "diagonal-plugin-normal",
        "diagonal-plugin-normal": "diagonal-plugin-normal",
        "optimal-plugin": "full-optimal-plugin",
        "full-optimal-plugin": "full-optimal-plugin",
    }
    if kind not in alias:
        raise ConfigError(f"unknown weight scheme {kind!r}")
    return _design.WeightSpec(kind=alias[kind])


def _build_constraints(fit_cfg: dict, sample: np.ndarray) -> _solve.ConstraintSet:
    var_rows = tuple(
        (float(b["level"]), float(b["bound"]), str(b.get("direction", "le")))
        for b in fit_cfg.get("var", [])
    )
    cvar_rows = tuple(
        (float(b["level"]), float(b["bound"]), str(b.get("direction", "le")))
        for b in fit_cfg.get("cvar", [])
    )
    lmoment = None
    if fit_cfg.get("lmoment"):
        block = fit_cfg["lmoment"]
        order = int(block["order"])
        eps = float(block.get("eps", 0.0))
        if "target" in block:
            target = tuple(float(v) for v in block["target"])
        else:
            target = tuple(float(v) for v in _metrics.sample_lmoments(sample, order))
        lmoment = (order, eps, target)
    bounds = None
    if fit_cfg.get("var_bounds"):
        bounds = tuple((float(lo), float(hi)) for lo, hi in fit_cfg["var_bounds"])
    return _solve.ConstraintSet(
        nonneg=bool(fit_cfg.get("nonneg", True)),
        cardinality=int(fit_cfg["cardinality"]) if fit_cfg.get("cardinality") else None,
        var_bounds=bounds,
        var_constraints=var_rows,
        cvar_constraints=cvar_rows,
        lmoment=lmoment,
    )


def _load_model(path: str) -> FittedModel:
    with open(path) as fh:
        return FittedModel.from_text(fh.read())


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_fit(args: argparse.Namespace) -> int:
    cfg = RunConfig.build(args)
    sample = _data.load_sample(args.input, column=args.column)
    catalog = _build_catalog(cfg)
    scheme = _build_scheme(cfg.fit)
    weights = _build_weights(cfg.fit)
    prob = _design.build_problem(sample, catalog, scheme, weights)
    cons = _build_constraints(cfg.fit, sample)
    error = cfg.fit.get("error", "l2")
    if error not in ("l1", "l2"):
        raise ConfigError(f"error must be 'l1' or 'l2', got {error!r}")

    lasso_cfg = cfg.fit.get("lasso") or {}
    lam_used = None
    if lasso_cfg.get("path_step"):
        lam_used, result = _solve.lasso_path_to_cardinality(
            prob,
            int(lasso_cfg.get("target_cardinality", 1)),
            float(lasso_cfg["path_step"]),
            error=error,
        )
    elif lasso_cfg.get("lam") is not None:
        lam_used = float(lasso_cfg["lam"])
        result = _solve.fit_lasso(prob, lam_used, error=error)
    elif cons.cardinality is not None:
        result = _solve.fit_cardinality(
            prob, cons, error=error, node_cap=int(cfg.fit.get("node_cap", 100_000))
        )
    elif error == "l2":
        result = _solve.fit_wls(prob, cons, compute_cov=bool(cfg.fit.get("compute_cov", False)))
    else:
        result = _solve.fit_lad(prob, cons)

    model = FittedModel(tuple(catalog), result.theta)
    _atomic_write(args.model_out, model.to_text())

    report = _metrics.gof(model, sample)
    rows: list[tuple] = [
        ("objective", result.objective),
        ("f_n", result.f_n),
        ("error_norm", result.error_norm),
        ("optimal", result.optimal),
        ("support_size", len(result.active_support)),
        ("support", ";".join(str(i) for i in result.active_support)),
    ]
    if lam_used is not None:
        rows.append(("lambda", lam_used))
    for name, value in report.rows():
        rows.append((name.lower(), value))
    se = None
    if result.cov_estimate is not None:
        se = np.sqrt(np.clip(np.diag(result.cov_estimate), 0.0, None))
    for i, (b, th) in enumerate(zip(catalog, result.theta)):
        label = b.kind if not b.params else f"{b.kind}[{';'.join(repr(v) for v in b.params)}]"
        rows.append((f"theta_{i}", th))
        rows.append((f"basis_{i}", label))
        if se is not None:
            rows.append((f"se_{i}", se[i]))
    _write_table(args.report_out, ["key", "value"], rows)
    print(f"fit: objective={_fmt(result.objective)} support={len(result.active_support)}")
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    cfg = RunConfig.build(args)
    model = _load_model(args.model)
    draws = model.sample(args.n, seed=cfg.seed)
    _atomic_write(args.out, "\n".join(repr(float(v)) for v in draws) + "\n")
    print(f"sample: wrote {args.n} draws (seed {cfg.seed})")
    return 0


def _cmd_gof(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    sample = _data.load_sample(args.input, column=args.column)
    weights = None
    if args.weights == "plugin-normal":
        p = _design.plotting_positions(len(sample))
        weights = _design.plugin_normal_weights(p)
    report = _metrics.gof(model, sample, weights=weights)
    _write_table(args.out, ["statistic", "value"], report.rows())
    for name, value in report.rows():
        print(f"{name}: {_fmt(value)}")
    return 0


def _cmd_qqplot(args: argparse.Namespace) -> int:
    model = _load_model(args.model)
    sample = np.sort(_data.load_sample(args.input, column=args.column))
    n = len(sample)
    p = np.arange(1, n + 1, dtype=float) / (n + 1.0)
    fitted = model.evaluate(p)
    rows = [("point", x, y) for x, y in zip(sample, fitted)]
    lo = min(float(sample[0]), float(fitted[0]))
    hi = max(float(sample[-1]), float(fitted[-1]))
    rows.append(("refline", lo, lo))
    rows.append(("refline", hi, hi))
    _write_table(args.out, ["kind", "x", "y"], rows)
    print(f"qqplot: wrote {n} points")
    return 0


def _cmd_logprob_plot(args: argparse.Namespace) -> int:
    sample = np.sort(_data.load_sample(args.input, column=args.column))
    n = len(sample)
    p = np.arange(1, n + 1, dtype=float) / (n + 1.0)
    med = float(np.median(sample))
    iqr = float(np.quantile(sample, 0.75) - np.quantile(sample, 0.25))
    if iqr <= 0.0:
        raise DataError("sample interquartile range is zero; cannot standardize")
    x = -np.log1p(-p)
    rows = [("sample", "point", xv, (yv - med) / iqr) for xv, yv in zip(x, sample)]
    for path in args.models or []:
        model = _load_model(path)
        name = os.path.splitext(os.path.basename(path))[0]
        curve = (model.evaluate(p) - med) / iqr
        rows.extend(("model:" + name, "curve", xv, yv) for xv, yv in zip(x, curve))
    _write_table(args.out, ["series", "kind", "x", "y"], rows)
    print(f"logprob-plot: wrote {n} points and {len(args.models or [])} curves")
    return 0


def _convergence_catalog(exp_cfg: dict, full: bool) -> tuple[list[_basis.BasisFunction], np.ndarray]:
    gammas = [float(g) for g in exp_cfg.get("gammas", _GAMMAS_FULL if full else _GAMMAS_SMALL)]
    nus = [float(v) for v in exp_cfg.get("nus", _NUS_FULL if full else _NUS_SMALL)]
    catalog = [_basis.constant_basis()]
    theta = [1.0]
    for g in gammas:
        for nu in nus:
            catalog.append(_basis.make_skewed_t(g, nu))
            theta.append(1.0 if g > 1.0 else 0.2)
    return catalog, np.asarray(theta)


def _one_convergence_rep(packed) -> tuple[int, int, float, float]:
    (size_idx, rep_idx, seed, n_obs, error, theta_true, gammas, nus) = packed
    catalog = [_basis.constant_basis()]
    for g in gammas:
        for nu in nus:
            catalog.append(_basis.make_skewed_t(g, nu))
    truth = FittedModel(tuple(catalog), np.asarray(theta_true))
    rng = np.random.default_rng(np.random.SeedSequence([seed, size_idx, rep_idx]))
    sample = truth.sample(n_obs, seed=rng)
    if error == "l2":
        weights = _design.WeightSpec("diagonal-plugin-normal")
        q_norm = 2.0
        weight_fn = _design.plugin_normal_weights
    else:
        weights = _design.WeightSpec("equal")
        q_norm = 1.0
        weight_fn = None
    prob = _design.build_problem(sample, catalog, _design.PlottingScheme(), weights)
    cons = _solve.ConstraintSet(nonneg=True)
    if error == "l2":
        result = _solve.fit_wls(prob, cons)
    else:
        result = _solve.fit_lad(prob, cons)
    fitted = FittedModel(tuple(catalog), result.theta)
    dist = _metrics.wasserstein(fitted.evaluate, truth.evaluate, w=weight_fn, q=q_norm)
    return size_idx, rep_idx, result.f_n, dist


def _cmd_simulate_convergence(args: argparse.Namespace) -> int:
    cfg = RunConfig.build(args)
    exp = cfg.experiment
    full = bool(args.full or exp.get("full", False))
    exponents = [float(e) for e in exp.get("exponents", _EXPONENTS_FULL if full else _EXPONENTS_SMALL)]
    reps = int(exp.get("repetitions", 100 if full else 20))
    band = float(exp.get("band", 0.90))
    if not 0.0 < band < 1.0:
        raise ConfigError(f"band level must lie in (0, 1), got {band}")
    error = cfg.fit.get("error", "l2")
    if error not in ("l1", "l2"):
        raise ConfigError(f"error must be 'l1' or 'l2', got {error!r}")
    gammas = [float(g) for g in exp.get("gammas", _GAMMAS_FULL if full else _GAMMAS_SMALL)]
    nus = [float(v) for v in exp.get("nus", _NUS_FULL if full else _NUS_SMALL)]
    _, theta_true = _convergence_catalog({"gammas": gammas, "nus": nus}, full)
    sizes = [int(10.0**e) for e in exponents]

    jobs = [
        (i, j, cfg.seed, n_obs, error, tuple(theta_true), tuple(gammas), tuple(nus))
        for i, n_obs in enumerate(sizes)
        for j in range(reps)
    ]
    objectives = np.zeros((len(sizes), reps))
    distances = np.zeros((len(sizes), reps))
    workers = max(1, args.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for size_idx, rep_idx, obj, dist in pool.map(_one_convergence_rep, jobs):
                objectives[size_idx, rep_idx] = obj
                distances[size_idx, rep_idx] = dist
    else:
        for job in jobs:
            size_idx, rep_idx, obj, dist = _one_convergence_rep(job)
            objectives[size_idx, rep_idx] = obj
            distances[size_idx, rep_idx] = dist

    lo_q, hi_q = (1.0 - band) / 2.0, 1.0 - (1.0 - band) / 2.0
    rows = []
    for i, n_obs in enumerate(sizes):
        rows.append(
            (
                n_obs,
                reps,
                float(np.mean(objectives[i])),
                float(np.quantile(objectives[i], lo_q)),
                float(np.quantile(objectives[i], hi_q)),
                float(np.mean(distances[i])),
                float(np.quantile(distances[i], lo_q)),
                float(np.quantile(distances[i], hi_q)),
            )
        )
    _write_table(
        args.out,
        [
            "size",
            "repetitions",
            "mean_objective",
            "objective_band_lo",
            "objective_band_hi",
            "mean_wasserstein",
            "wasserstein_band_lo",
            "wasserstein_band_hi",
        ],
        rows,
    )
    print(f"simulate-convergence: {len(sizes)} sizes x {reps} repetitions ({error})")
    return 0


def _cmd_drawdowns(args: argparse.Namespace) -> int:
    series = _data.load_prices(args.input, date_column=args.date_column, price_column=args.price_column)
    dd = _data.drawdown_series(series)
    records = _data.drawdown_periods(dd, include_open=not args.exclude_open)
    rows = [
        (
            series.t[rec.start],
            series.t[rec.end],
            rec.max_drawdown,
            rec.log_drawdown,
            rec.open_ended,
        )
        for rec in records
    ]
    _write_table(
        args.out, ["start", "end", "max_drawdown", "log_drawdown", "open_ended"], rows
    )
    print(f"drawdowns: {len(records)} periods")
    return 0


# ---------------------------------------------------------------------------
# argument parsing / dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantmix",
        description=(
            "Fit, evaluate and sample mixture quantile models. Options are "
            "merged as flags > config file > defaults; the random seed comes "
            f"from --seed, the config, or ${SEED_ENV_VAR}."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML config file (catalog/fit/experiment blocks)")
        p.add_argument("--seed", type=int, help="random seed (overrides config and env)")

    p_fit = sub.add_parser("fit", help="fit a mixture quantile model to a sample")
    common(p_fit)
    p_fit.add_argument("--input", required=True, help="sample file (one value per line or CSV)")
    p_fit.add_argument("--column", help="CSV column with the sample values")
    p_fit.add_argument("--model-out", required=True, help="output path for the model document")
    p_fit.add_argument("--report-out", required=True, help="output path for the fit report table")
    p_fit.add_argument("--error", choices=["l1", "l2"], help="error norm")
    p_fit.add_argument(
        "--weights",
        choices=["equal", "plugin-normal", "optimal-plugin"],
        help="weight scheme (Table-1-style WMSE normalizes by the weight sum)",
    )
    p_fit.add_argument("--scheme", choices=["standard", "shrunk", "fixed-levels"])
    p_fit.add_argument("--shrink-band", type=float, help="tail band width for the shrunk scheme")
    p_fit.add_argument("--cardinality", type=int, help="max number of non-zero coefficients")
    p_fit.add_argument("--node-cap", type=int, help="branch-and-bound node cap")
    p_fit.add_argument("--nonneg", action=argparse.BooleanOptionalAction, default=None)

    p_sample = sub.add_parser("sample", help="draw from a fitted model by inverse transform")
    common(p_sample)
    p_sample.add_argument("--model", required=True)
    p_sample.add_argument("--n", type=int, required=True)
    p_sample.add_argument("--out", required=True)

    p_gof = sub.add_parser("gof", help="goodness-of-fit statistics (WMSE, MAE, KS, LLK)")
    common(p_gof)
    p_gof.add_argument("--model", required=True)
    p_gof.add_argument("--input", required=True)
    p_gof.add_argument("--column")
    p_gof.add_argument("--weights", choices=["equal", "plugin-normal"], default="equal")
    p_gof.add_argument("--out", required=True)

    p_qq = sub.add_parser("qqplot", help="order statistics vs fitted quantiles plot data")
    common(p_qq)
    p_qq.add_argument("--model", required=True)
    p_qq.add_argument("--input", required=True)
    p_qq.add_argument("--column")
    p_qq.add_argument("--out", required=True)

    p_lp = sub.add_parser(
        "logprob-plot", help="sample and model curves against -log(1-p) (standardized y)"
    )
    common(p_lp)
    p_lp.add_argument("--input", required=True)
    p_lp.add_argument("--column")
    p_lp.add_argument("--models", nargs="*", help="fitted model files to overlay")
    p_lp.add_argument("--out", required=True)

    p_sim = sub.add_parser(
        "simulate-convergence",
        help="skewed-t recovery experiment: error and distance vs sample size",
    )
    common(p_sim)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--error", choices=["l1", "l2"], help="error norm (default l2)")
    p_sim.add_argument("--full", action="store_true", help="full 11x11 grid, 9 sizes, 100 reps")
    p_sim.add_argument("--workers", type=int, default=1, help="parallel repetition workers")

    p_dd = sub.add_parser("drawdowns", help="extract drawdown periods from a price series")
    common(p_dd)
    p_dd.add_argument("--input", required=True, help="CSV with date and price columns")
    p_dd.add_argument("--date-column", help="date column name or index (default: first column)")
    p_dd.add_argument("--price-column", help="price column name (default: 'Adj Close')")
    p_dd.add_argument("--exclude-open", action="store_true", help="drop an unfinished final period")
    p_dd.add_argument("--out", required=True)
    return parser


_COMMANDS = {
    "fit": _cmd_fit,
    "sample": _cmd_sample,
    "gof": _cmd_gof,
    "qqplot": _cmd_qqplot,
    "logprob-plot": _cmd_logprob_plot,
    "simulate-convergence": _cmd_simulate_convergence,
    "drawdowns": _cmd_drawdowns,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, CatalogError, ParameterError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, QuantmixError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
