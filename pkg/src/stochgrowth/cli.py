"""Command-line front end.

Subcommands ``simulate``, ``kinetics``, ``estimate`` and ``synth`` each write
CSV/JSON artifacts into ``--out`` and finish by writing ``manifest.json``.
Configuration is YAML; every section is optional and missing keys take the
defaults in :data:`DEFAULT_CONFIG`.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from . import __version__
from .dataio import (
    SeriesSource,
    default_synth_spec,
    export_gdp_csv,
    export_income_csv,
    fetch_series,
    parse_gdp_csv,
    parse_income_csv,
    synth_generate,
)
from .econometrics import fit_gamma_mle, reduced_form_pipeline, structural_pipeline
from .errors import ConfigError, DataIOError, StochGrowthError
from .grids import GridDensity
from .kinetics import (
    MeanFieldState,
    TransitionKernel,
    generator_moments,
    integrate_master,
    integrate_mean_field,
    mean_field_to_csv,
    moments_from_grid,
    stationary_residual,
)
from .law_lab import GammaLaw
from .sim_core import (
    RandomMapEconomy,
    estimate_stationary,
    simulate_chain,
    stationary_uniqueness,
)

logger = logging.getLogger("stochgrowth")

DEFAULT_CONFIG: dict[str, Any] = {
    "seed": 0,
    "economy": {
        "kind": "affine",
        "state_bounds": [0.0, 2.0],
        "noise": {"A": [0.0, 1.0], "B": [0.0, 0.5]},
        "n_individuals": 1,
    },
    "simulate": {
        "horizon": 200,
        "initial": None,
        "burn_in": 1000,
        "n_samples": 100_000,
        "ks_threshold": 0.02,
    },
    "kinetics": {
        "mode": "master",
        "grid": {"lo": 0.0, "hi": 25.0, "dx": 0.01},
        "kernel": {"kind": "exponential", "beta": 1.0},
        "alpha": 1.0,
        "drift": {"kind": "decay", "rate": 1.0},
        "initial": {"kind": "gamma", "alpha": 3.0, "beta": 1.0},
        "dt": None,
        "horizon": 20.0,
        "snapshots": 11,
        "mean_field_dt": 0.01,
        "literal_mean_field": False,
        "residual_threshold_dx": 5.0,
        "gamma_pairs": [[1.8, 0.09], [1.6, 0.04]],
        "figure_points": 1001,
        "figure_x_max": None,
    },
    "estimate": {
        "window": 4,
        "eps1_var": "sample",
        "c0": 1.0,
        "timeout": 30.0,
        "cache_dir": None,
    },
    "synth": {
        "first_year": 1994,
        "last_year": 2015,
        "alpha": 2.0,
        "beta_start": 0.17,
        "beta_end": 0.12,
        "theta_start": 0.02,
        "theta_end": 0.02,
        "m0": 28_000.0,
        "eps1_sd": 0.002,
        "eps2_scale": 1.0,
        "n_income": 100_000,
        "n_bins": 40,
    },
}

RECOVERY_BETA_TOL = 0.03
RECOVERY_THETA_Z = 2.0


# ---------------------------------------------------------------------------
# Config and manifest helpers
# ---------------------------------------------------------------------------


REPLACED_WHOLE = ("noise", "kernel", "initial", "drift", "table")


def _merge(base: dict[str, Any], override: Mapping[str, Any], path: str = "") -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base and path != "economy":
            raise ConfigError(where, "unknown key")
        if key in REPLACED_WHOLE or key not in base:
            # validated later by the builder for that section
            out[key] = val
        elif isinstance(base[key], dict):
            if not isinstance(val, Mapping):
                raise ConfigError(where, "must be a mapping")
            out[key] = _merge(base[key], val, where)
        else:
            out[key] = val
    return out


def load_config(path: str | None, seed: int | None) -> dict[str, Any]:
    cfg: Mapping[str, Any] = {}
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise DataIOError(f"cannot read config {path}: {exc}") from None
        try:
            cfg = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(path, f"invalid YAML: {exc}") from None
        if not isinstance(cfg, Mapping):
            raise ConfigError(path, "top level must be a mapping")
    resolved = _merge(DEFAULT_CONFIG, cfg)
    if seed is not None:
        resolved["seed"] = seed
    try:
        resolved["seed"] = int(resolved["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed", "must be an integer") from None
    return resolved


def config_digest(cfg: Mapping[str, Any]) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _json_default(o: Any) -> Any:
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _clean(o: Any) -> Any:
    # JSON has no NaN/inf; emit null instead
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)) and not math.isfinite(float(o)):
        return None
    return o


class _Run:
    """Collects outputs of one subcommand and writes the manifest last."""

    def __init__(self, command: str, cfg: dict[str, Any], out_dir: Path):
        self.command = command
        self.cfg = cfg
        self.out = out_dir
        self.outputs: list[str] = []
        self.started = _now()
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise DataIOError(f"cannot create output directory {out_dir}: {exc}") from None

    def write_text(self, name: str, text: str) -> Path:
        path = self.out / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise DataIOError(f"cannot write {path}: {exc}") from None
        self.outputs.append(str(path))
        return path

    def write_json(self, name: str, obj: Any) -> Path:
        return self.write_text(name, json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n")

    def finish(self, summary: dict[str, Any]) -> dict[str, Any]:
        manifest = {
            "command": self.command,
            "version": __version__,
            "config_digest": config_digest(self.cfg),
            "seed": self.cfg["seed"],
            "outputs": self.outputs,
            "started": self.started,
            "finished": _now(),
            "config": self.cfg,
            "summary": summary,
        }
        path = self.out / "manifest.json"
        try:
            path.write_text(json.dumps(_clean(manifest), indent=2, default=_json_default) + "\n")
        except OSError as exc:
            raise DataIOError(f"cannot write {path}: {exc}") from None
        return manifest


def _csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)) for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: dict[str, Any], out_dir: Path) -> dict[str, Any]:
    econ = RandomMapEconomy.from_config(cfg["economy"])
    sc = cfg["simulate"]
    seed = cfg["seed"]
    run = _Run("simulate", cfg, out_dir)
    initial = econ.lo if sc["initial"] is None else float(sc["initial"])
    traj = simulate_chain(econ, initial, int(sc["horizon"]), seed)
    run.write_text("trajectory.csv", traj.to_csv())
    stat = estimate_stationary(econ, int(sc["burn_in"]), int(sc["n_samples"]), seed)
    run.write_text("stationary.csv", stat.to_csv())
    rep = stationary_uniqueness(
        econ, int(sc["burn_in"]), int(sc["n_samples"]), seed, float(sc["ks_threshold"])
    )
    report = {
        "ks_distance": rep.ks_distance,
        "p_value": rep.p_value,
        "n_samples": rep.n_samples,
        "burn_in": rep.burn_in,
        "threshold": rep.threshold,
        "passed": rep.passed,
        "stationary_mean": stat.mean(),
        "trajectory_clipped": traj.n_clipped,
    }
    run.write_json("ks_report.json", report)
    return run.finish({"ks_distance": rep.ks_distance, "passed": rep.passed})


# ---------------------------------------------------------------------------
# kinetics
# ---------------------------------------------------------------------------


def _kernel_from_config(kc: Mapping[str, Any]) -> TransitionKernel:
    kind = kc.get("kind", "exponential")
    if kind == "exponential":
        return TransitionKernel.exponential(float(kc.get("beta", 1.0)))
    if kind == "delta":
        return TransitionKernel.delta()
    if kind == "grid":
        path = kc.get("path")
        if not path:
            raise ConfigError("kinetics.kernel.path", "grid kernels need a CSV path")
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise DataIOError(f"cannot read kernel {path}: {exc}") from None
        return TransitionKernel.from_csv(text, source=str(path))
    raise ConfigError("kinetics.kernel.kind", f"unknown kernel kind {kind!r}")


def _drift_from_config(dc: Any):
    if isinstance(dc, (int, float)):
        return float(dc), None
    kind = dc.get("kind", "constant")
    if kind == "decay":
        rate = float(dc.get("rate", 1.0))
        return (lambda x: -rate * x), rate
    if kind == "constant":
        return float(dc.get("c", 0.0)), None
    raise ConfigError("kinetics.drift.kind", f"unknown drift kind {kind!r}")


def _initial_from_config(ic: Mapping[str, Any], grid: np.ndarray) -> GridDensity:
    kind = ic.get("kind", "gamma")
    if kind == "gamma":
        vals = GammaLaw(float(ic.get("alpha", 2.0)), float(ic.get("beta", 1.0))).pdf(grid)
    elif kind == "uniform":
        lo, hi = float(ic.get("lo", grid[0])), float(ic.get("hi", grid[-1]))
        if not lo < hi:
            raise ConfigError("kinetics.initial", "uniform initial needs lo < hi")
        vals = np.where((grid >= lo) & (grid <= hi), 1.0 / (hi - lo), 0.0)
    elif kind == "csv":
        try:
            dens = GridDensity.from_csv(Path(ic["path"]).read_text())
        except KeyError:
            raise ConfigError("kinetics.initial.path", "csv initial needs a path") from None
        except OSError as exc:
            raise DataIOError(f"cannot read initial density: {exc}") from None
        return dens
    else:
        raise ConfigError("kinetics.initial.kind", f"unknown initial kind {kind!r}")
    return GridDensity(grid, np.asarray(vals, dtype=float))


def _gamma_figure(kc: Mapping[str, Any], run: _Run) -> dict[str, Any]:
    pairs = kc["gamma_pairs"]
    try:
        laws = [GammaLaw(float(a), float(b)) for a, b in pairs]
    except (TypeError, ValueError):
        raise ConfigError("kinetics.gamma_pairs", "must be a list of [alpha, beta] pairs") from None
    if not laws:
        raise ConfigError("kinetics.gamma_pairs", "needs at least one pair")
    x_max = kc["figure_x_max"] or max(float(l.ppf(0.999)) for l in laws)
    x = np.linspace(0.0, float(x_max), int(kc["figure_points"]))
    cols = [np.asarray(l.pdf(x)) for l in laws]
    header = ["x"] + [f"gamma_a{l.alpha:g}_b{l.beta:g}" for l in laws]
    run.write_text("gamma_figure.csv", _csv(header, zip(x, *cols)))
    return {"mode": "gamma_figure", "laws": [l.to_dict() for l in laws], "means": [l.mean for l in laws]}


def cmd_kinetics(cfg: dict[str, Any], out_dir: Path) -> dict[str, Any]:
    kc = cfg["kinetics"]
    run = _Run("kinetics", cfg, out_dir)
    if kc["mode"] == "gamma_figure":
        return run.finish(_gamma_figure(kc, run))
    if kc["mode"] != "master":
        raise ConfigError("kinetics.mode", "must be 'master' or 'gamma_figure'")
    g = kc["grid"]
    dx = float(g["dx"])
    if not dx > 0 or not float(g["hi"]) > float(g["lo"]):
        raise ConfigError("kinetics.grid", "need dx > 0 and lo < hi")
    n = int(round((float(g["hi"]) - float(g["lo"])) / dx)) + 1
    grid = np.linspace(float(g["lo"]), float(g["lo"]) + (n - 1) * dx, n)
    kernel = _kernel_from_config(kc["kernel"])
    drift, decay = _drift_from_config(kc["drift"])
    p0 = _initial_from_config(kc["initial"], grid)
    alpha = float(kc["alpha"])
    dt = kc["dt"]
    if dt is None:
        vmax = float(np.max(np.abs(drift(grid)))) if callable(drift) else abs(drift)
        dt = min(dx / vmax if vmax > 0 else math.inf, 0.5 / alpha if alpha > 0 else math.inf, 0.01)
    horizon = float(kc["horizon"])
    n_steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
    stride = max(1, n_steps // max(1, int(kc["snapshots"]) - 1))
    snaps = integrate_master(p0, kernel, alpha, drift, float(dt), horizon, save_every=stride)
    run.write_text("density_snapshots.csv", "".join(
        s.to_csv(with_time=True) if i == 0 else s.to_csv(with_time=True).split("\n", 1)[1]
        for i, s in enumerate(snaps)
    ))

    summary: dict[str, Any] = {"mode": "master", "dt": dt, "n_snapshots": len(snaps)}
    final = snaps[-1]
    summary["final_mass"] = final.mass
    summary["outflow"] = final.outflow
    m0 = moments_from_grid(p0.normalized())
    mf = integrate_mean_field(
        MeanFieldState(m0["mean"], m0["variance"], 0.0),
        generator_moments(kernel, alpha, drift),
        float(kc["mean_field_dt"]),
        horizon,
        literal=bool(kc["literal_mean_field"]),
    )
    run.write_text("mean_field.csv", mean_field_to_csv(mf))
    mom = moments_from_grid(final.normalized())
    summary["master_moments"] = mom
    summary["mean_field_final"] = {"m": mf[-1].m, "sigma2": mf[-1].sigma2}

    report: dict[str, Any] = {"horizon": horizon, "dx": dx, "dt": dt}
    if kernel.kind == "exponential" and decay is not None:
        threshold = float(kc["residual_threshold_dx"]) * dx
        res = stationary_residual(final.normalized(), kernel, alpha, decay_rate=decay)
        stationary = GammaLaw(alpha / decay, kernel.beta)
        exact = GridDensity(grid, stationary.pdf(grid))
        l1 = float(np.dot(final.weights, np.abs(final.values - exact.values)))
        report.update({
            "stationary_law": stationary.to_dict(),
            "residual_final": res,
            "residual_exact_gamma": stationary_residual(exact, kernel, alpha, decay_rate=decay),
            "threshold": threshold,
            "l1_to_stationary": l1,
        })
        report["passed"] = report["residual_final"] < threshold
        summary["residual"] = res
        summary["residual_threshold"] = threshold
        summary["residual_passed"] = report["passed"]
    run.write_json("residual_report.json", report)
    return run.finish(summary)


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(cfg: dict[str, Any], out_dir: Path) -> dict[str, Any]:
    sc = dict(cfg["synth"])
    spec = default_synth_spec(seed=cfg["seed"], **sc)
    spec.economy = RandomMapEconomy.from_config(cfg["economy"])
    data = synth_generate(spec)
    run = _Run("synth", cfg, out_dir)
    run.write_text("gdp.csv", export_gdp_csv(data.gdp))
    run.write_text("income.csv", export_income_csv(data.incomes))
    run.write_json("truth.json", data.truth)
    return run.finish({"years": [spec.years[0], spec.years[-1]], "n_histograms": len(data.incomes)})


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _source(location: str, hint: str) -> SeriesSource:
    kind = "remote-url" if "://" in location else "local-file"
    return SeriesSource(kind, location, hint)


def _recovery(truth: Mapping[str, Any], laws: Mapping[int, GammaLaw], sres) -> dict[str, Any]:
    years = [int(y) for y in truth["years"]]
    beta_true = dict(zip(years, truth["beta"]))
    beta_err = max(abs(laws[y].beta / beta_true[y] - 1.0) for y in years)
    theta_true = np.asarray(truth["theta"], dtype=float)[1:]
    th = np.array([s.theta for s in sres.filter])
    c = np.array([s.C for s in sres.filter])
    rmse = float(np.sqrt(np.mean((th - theta_true) ** 2)))
    post_sd = float(np.sqrt(np.mean(c)))
    endo_p = sres.filter_endogeneity.p_values.get("ratio", math.nan)
    checks = {
        "beta_path_within_3pct": beta_err < RECOVERY_BETA_TOL,
        "theta_rmse_below_2_posterior_sd": rmse < RECOVERY_THETA_Z * post_sd,
        "filter_residual_uncorrelated": bool(np.isfinite(endo_p) and endo_p >= 0.05),
    }
    return {
        "beta_max_rel_error": beta_err,
        "theta_rmse": rmse,
        "theta_posterior_sd": post_sd,
        "filter_endogeneity_p_value": endo_p,
        "checks": checks,
        "all_green": all(checks.values()),
    }


def cmd_estimate(
    cfg: dict[str, Any],
    gdp_path: str,
    income_path: str,
    out_dir: Path,
    truth_path: str | None = None,
    offline: bool | None = None,
) -> dict[str, Any]:
    ec = cfg["estimate"]
    fetch_kw = {"timeout": float(ec["timeout"]), "cache_dir": ec["cache_dir"], "offline": offline}
    gdp = parse_gdp_csv(fetch_series(_source(gdp_path, "gdp-csv"), **fetch_kw), source=gdp_path)
    hists = parse_income_csv(fetch_series(_source(income_path, "income-csv"), **fetch_kw), source=income_path)
    truth = None
    if truth_path:
        try:
            truth = json.loads(Path(truth_path).read_text())
        except OSError as exc:
            raise DataIOError(f"cannot read {truth_path}: {exc}") from None
    run = _Run("estimate", cfg, out_dir)

    fits = {h.year: fit_gamma_mle(h) for h in hists}
    laws = {y: f.law for y, f in fits.items()}
    run.write_text("gamma_path.csv", _csv(
        ["year", "alpha", "beta", "mean", "loglik", "grad_norm"],
        ([y, f.law.alpha, f.law.beta, f.law.mean, f.loglik, f.grad_norm] for y, f in sorted(fits.items())),
    ))

    results: dict[str, Any] = {"count_unit": "as supplied (Gamma fit is invariant to the count unit)"}
    reduced = {}
    if len(gdp) >= 20:
        for mode in ("level", "log"):
            rf = reduced_form_pipeline(gdp, mode=mode, window=int(ec["window"]))
            reduced[mode] = rf
            for eq in ("eq1", "eq2"):
                run.write_text(f"table1_{eq}_{mode}.csv", _table_csv(getattr(rf, eq)))
            results[f"reduced_{mode}"] = {
                "eq1": rf.eq1.to_dict(), "eq2": rf.eq2.to_dict(), "status": rf.status,
                "window": rf.window, "iterations": rf.iterations, "ljung_box": rf.ljung_box,
                "breusch_pagan": rf.breusch_pagan, "warnings": rf.warnings,
            }
    else:
        results["reduced_skipped"] = f"need at least 20 GDP observations, got {len(gdp)}"

    eps1 = ec["eps1_var"]
    sres = structural_pipeline(gdp, laws, eps1_var=eps1 if eps1 == "sample" else float(eps1), c0=float(ec["c0"]))
    for name, reg in (("pre", sres.pre), ("sf1", sres.sf1), ("sf1_residual", sres.endogeneity),
                      ("filter_residual", sres.filter_endogeneity)):
        run.write_text(f"table2_{name}.csv", _table_csv(reg))
    run.write_text("filter_path.csv", _csv(
        ["year", "theta", "C", "residual"],
        ([int(y), s.theta, s.C, r] for y, s, r in zip(sres.filter_years, sres.filter, sres.filter_residuals)),
    ))
    betas = [laws[y].beta for y in sorted(laws)]
    endo = {
        "sf1_residual_on_ratio": sres.endogeneity.to_dict(),
        "filter_residual_on_ratio": sres.filter_endogeneity.to_dict(),
        "sf1_residual_significant": sres.endogeneity.significant("ratio") if not sres.endogeneity.degenerate else False,
        "filter_residual_significant": sres.filter_endogeneity.significant("ratio")
        if not sres.filter_endogeneity.degenerate else False,
    }
    run.write_json("endogeneity.json", endo)
    results["structural"] = {
        "sf1": sres.sf1.to_dict(),
        "pre": sres.pre.to_dict(),
        "sf1_significant": sres.sf1_significant,
        "theta_mean": sres.theta_mean,
        "theta0": sres.theta0,
        "eps1_var": sres.eps1_var,
        "beta_first_last": [betas[0], betas[-1]],
        "beta_monotone_decreasing": bool(np.all(np.diff(betas) < 0)),
        "warnings": sres.warnings,
    }
    if "log" in reduced and sres.theta_mean != 0:
        # reduced-form level coefficient relative to the mean structural growth rate
        results["structural"]["coef1_to_theta_ratio"] = reduced["log"].eq1.coefficients["m"] / sres.theta_mean
    summary: dict[str, Any] = {
        "theta_mean": sres.theta_mean,
        "beta_first_last": [betas[0], betas[-1]],
        "filter_residual_significant": endo["filter_residual_significant"],
    }
    if truth is not None:
        rec = _recovery(truth, laws, sres)
        run.write_json("recovery.json", rec)
        summary["recovery_all_green"] = rec["all_green"]
    run.write_json("results.json", results)
    return run.finish(summary)


def _table_csv(reg) -> str:
    rows = reg.table_rows()
    return _csv(["coefficient", "estimate", "std_error", "stars"],
                ([r["coefficient"], r["estimate"], r["std_error"], r["stars"]] for r in rows))


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, top: bool) -> None:
    # subcommand copies must not overwrite values given before the subcommand
    d = (lambda v: v) if top else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", default=d(None), help="YAML configuration file")
    p.add_argument("--seed", type=int, default=d(None), help="override the configured seed")
    p.add_argument("--out", default=d("out"), help="output directory (default: out)")
    p.add_argument("--offline", action="store_true", default=d(False), help="serve remote sources from the cache only")
    p.add_argument("-v", "--verbose", action="count", default=d(0), help="more logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochgrowth", description=__doc__.split("\n\n")[0])
    _add_common(parser, top=True)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {
        "simulate": "random-map economy: trajectory, stationary law, KS report",
        "kinetics": "master equation, mean field, Gamma figure curves",
        "estimate": "reduced-form and structural estimation",
        "synth": "synthetic GDP and income data with ground truth",
    }
    for name, text in subs.items():
        sp = sub.add_parser(name, help=text)
        _add_common(sp, top=False)
        if name == "estimate":
            sp.add_argument("--gdp", required=True, help="GDP CSV path or https URL")
            sp.add_argument("--income", required=True, help="income histogram CSV path or https URL")
            sp.add_argument("--truth", help="truth.json from `synth` for a recovery report")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args.seed)
        out = Path(args.out)
        if args.command == "simulate":
            manifest = cmd_simulate(cfg, out)
        elif args.command == "kinetics":
            manifest = cmd_kinetics(cfg, out)
        elif args.command == "synth":
            manifest = cmd_synth(cfg, out)
        else:
            manifest = cmd_estimate(cfg, args.gdp, args.income, out, args.truth, offline=args.offline or None)
    except StochGrowthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(_clean(manifest["summary"]), default=_json_default))
    return 0


if __name__ == "__main__":
    sys.exit(main())
