"""Command-line front end: wires JSON configs to simulation, analytics, and
studies, and emits reproducible tables, reports, and figures.

Exit codes: 0 success, 2 configuration or validation error, 3 I/O failure,
4 study criterion failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analytics, experiments, io
from .errors import DmrError
from .model import (
    GridSpec,
    ModelParams,
    ReflectionSpec,
    params_from_dict,
    params_to_dict,
    validate,
)
from .sde import simulate_reflected_block, simulate_system_block

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CRITERION = 4


@dataclass
class RunConfig:
    model: ModelParams
    refl: ReflectionSpec | None
    grid: GridSpec
    n_paths: int
    seed: int
    study: str | None
    study_args: dict
    out_dir: Path
    workers: int = 1
    binary: bool = False
    reflected: bool = False
    svg: bool = False
    raw: dict = field(default_factory=dict)

    def manifest(self, command: str) -> dict:
        doc = dict(self.raw)
        doc["model"] = params_to_dict(self.model, self.refl)
        doc["grid"] = {"t_end": self.grid.t_end, "n_steps": self.grid.n_steps}
        doc["n_paths"] = self.n_paths
        doc["seed"] = self.seed
        if self.study:
            doc["study"] = self.study
            doc["study_args"] = self.study_args
        doc["out_dir"] = str(self.out_dir)
        return {"command": command, "package_version": __version__, "config": doc}


class ConfigError(Exception):
    pass


def load_config(args: argparse.Namespace) -> RunConfig:
    try:
        raw = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    if "model" not in raw:
        raise ConfigError("config missing 'model' section")
    try:
        model, refl = params_from_dict(raw["model"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model parameters: {exc}") from exc

    grid_doc = raw.get("grid", {})
    try:
        grid = GridSpec(t_end=float(grid_doc.get("t_end", 1.0)),
                        n_steps=int(grid_doc.get("n_steps", 100)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc

    seed = raw.get("seed")
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    if seed is None:
        seed = os.environ.get("DMR_SEED")
    if seed is None:
        raise ConfigError("no seed: set 'seed' in the config, --seed, or DMR_SEED")

    n_paths = raw.get("n_paths", 1)
    if getattr(args, "n_paths", None) is not None:
        n_paths = args.n_paths
    out_dir = raw.get("out_dir", ".")
    if getattr(args, "out_dir", None) is not None:
        out_dir = args.out_dir

    cfg = RunConfig(
        model=model,
        refl=refl,
        grid=grid,
        n_paths=int(n_paths),
        seed=int(seed),
        study=raw.get("study"),
        study_args=dict(raw.get("study_args", {})),
        out_dir=Path(out_dir),
        workers=getattr(args, "workers", 1) or 1,
        binary=bool(getattr(args, "binary", False)),
        reflected=bool(getattr(args, "reflected", False)),
        svg=bool(getattr(args, "svg", False)),
        raw=raw,
    )

    report = validate(cfg.model)
    if not report.passed:
        raise ConfigError("invalid parameters: " + "; ".join(report.violations))
    gv = cfg.grid.violations()
    if gv:
        raise ConfigError("invalid grid: " + "; ".join(gv))
    if cfg.refl is not None:
        rv = cfg.refl.violations(cfg.model.internal)
        if rv:
            raise ConfigError("invalid reflection: " + "; ".join(rv))
    if cfg.n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    return cfg


def _prepare_out_dir(cfg: RunConfig) -> None:
    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        probe = cfg.out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise IOError(f"out_dir not writable: {exc}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    _prepare_out_dir(cfg)
    times = cfg.grid.times()
    if cfg.reflected:
        if cfg.refl is None:
            raise ConfigError("--reflected requires 'm' in the model section")
        y, l, z = simulate_reflected_block(cfg.model.internal, cfg.refl.m, cfg.grid,
                                           cfg.seed, 0, cfg.n_paths)
        named = {"y_m": y, "l_m": l, "z_m": z}
    else:
        blk = simulate_system_block(cfg.model, cfg.grid, cfg.seed, 0, cfg.n_paths,
                                    store_normals=False)
        named = {"s": blk.s, "x": blk.x, "y": blk.y}

    if cfg.binary:
        cols = [np.tile(times, 1)] if cfg.n_paths == 1 else [times]
        table = np.column_stack([times] + [b[p] for p in range(cfg.n_paths) for b in named.values()])
        io.write_binary_table(cfg.out_dir / "paths.bin", table)
    elif cfg.n_paths == 1:
        io.write_path_table(cfg.out_dir / "paths.csv", times,
                            {k: v[0] for k, v in named.items()})
    else:
        io.write_multi_path_table(cfg.out_dir / "paths.csv", times, named)
    io.write_json(cfg.out_dir / "manifest.json", cfg.manifest("simulate"))
    return EXIT_OK


def _density_x_grid(p, n: int = 400) -> np.ndarray:
    """Log-spaced evaluation grid covering the bulk of the stationary law."""
    from scipy import stats

    s2 = p.sigma2 ** 2
    if p.alpha2 == 0.5:
        dist = stats.gamma(a=2.0 * p.a2 / s2, scale=s2 / (2.0 * p.b2))
        lo, hi = dist.ppf(0.0005), dist.ppf(0.9995)
    elif p.alpha2 == 1.0:
        dist = stats.invgamma(a=2.0 * p.b2 / s2 + 1.0, scale=2.0 * p.a2 / s2)
        lo, hi = dist.ppf(0.0005), dist.ppf(0.9995)
    else:
        mean = p.a2 / p.b2
        probe = np.geomspace(mean * 1e-4, mean * 50.0, 60)
        cdf = analytics.stationary_cdf(p, probe)
        lo = probe[int(np.searchsorted(cdf, 0.0005))]
        hi = probe[min(int(np.searchsorted(cdf, 0.9995)), len(probe) - 1)]
    return np.geomspace(max(lo, 1e-12), hi, n)


def _json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return v


def cmd_analytics(cfg: RunConfig) -> int:
    _prepare_out_dir(cfg)
    p = cfg.model.internal
    times = cfg.grid.times()
    summary: dict = {"alpha2": p.alpha2}

    curve = analytics.moment_curve(p, cfg.grid)
    if curve.second_moment is not None:
        io.write_csv(cfg.out_dir / "moments.csv", ["t", "mean", "second_moment"],
                     [curve.times, curve.mean, curve.second_moment])
    else:
        io.write_csv(cfg.out_dir / "moments.csv", ["t", "mean"],
                     [curve.times, curve.mean])
        summary["second_moment_notice"] = "no closed form; see moment_plateau_study"

    if p.a2 > 0:
        dens = analytics.stationary_density(p)
        xg = _density_x_grid(p)
        io.write_csv(cfg.out_dir / "density.csv", ["x", "pdf"], [xg, dens(xg)])
        summary["density_regime"] = dens.regime.value
        summary["density_normalizer"] = dens.normalizer
    else:
        summary["density_notice"] = "a2 = 0: no stationary density (NonErgodic)"

    c = p.y0
    xs = np.geomspace(c / 8.0, c * 8.0, 33)
    svals = np.array([analytics.scale_function(p, c, float(x)) for x in xs])
    io.write_csv(cfg.out_dir / "scale.csv", ["x", "s"], [xs, svals])

    cls = analytics.classify_boundary(p)
    io.write_json(cfg.out_dir / "classification.json", {
        "verdict": cls.verdict.value,
        "strictly_positive": cls.strictly_positive,
        "s_at_zero": _json_safe(cls.s_at_zero),
        "s_at_infinity": _json_safe(cls.s_at_infinity),
    })

    io.write_json(cfg.out_dir / "analytics.json", summary)
    if cfg.svg:
        io.write_svg_curves(cfg.out_dir / "mean_curve.svg", times,
                            {"mean": curve.mean}, title="closed-form mean")
    io.write_json(cfg.out_dir / "manifest.json", cfg.manifest("analytics"))
    return EXIT_OK


def _study_density_fit(cfg: RunConfig) -> dict:
    p = cfg.model.internal
    burn_in = float(cfg.study_args.get("burn_in", 10.0 / p.b2))
    rep = experiments.density_fit_study(p, cfg.grid, cfg.n_paths, burn_in,
                                        cfg.seed, workers=cfg.workers)
    if cfg.svg:
        dens = analytics.stationary_density(p)
        xg = _density_x_grid(p)
        io.write_svg_curves(cfg.out_dir / "density_fit.svg", xg,
                            {"analytic pdf": dens(xg)}, title="stationary density")
    return rep


def _study_comparison(cfg: RunConfig) -> dict:
    args = cfg.study_args
    return experiments.comparison_violation_study(
        cfg.model.external,
        gap=float(args.get("gap", 0.0)),
        dt_list=[float(v) for v in args.get("dt_list", [1e-2, 5e-3, 2.5e-3])],
        n_paths=cfg.n_paths,
        seed=cfg.seed,
        t_end=float(args.get("t_end", 5.0)),
        u_base=float(args.get("u_base", 1.0)),
        workers=cfg.workers,
    )


def _study_occupancy(cfg: RunConfig) -> dict:
    args = cfg.study_args
    eps = float(args.get("epsilon", 0.1))
    horizons = [float(v) for v in args.get("horizons", [cfg.grid.t_end])]
    reports = experiments.occupancy_study(cfg.model, eps, horizons,
                                          cfg.grid.n_steps, cfg.n_paths,
                                          cfg.seed, workers=cfg.workers)
    return {
        "study": "occupancy",
        "epsilon": eps,
        "regime_covered": reports[0].regime_covered,
        "regime_flag": None if reports[0].regime_covered else "RegimeNotCovered",
        "horizons": [r.horizon for r in reports],
        "fraction_visited": [r.fraction_visited for r in reports],
        "fraction_x_hit_zero_with_y_small": [r.fraction_x_hit_zero_with_y_small for r in reports],
        "mean_first_entry_time": [r.mean_first_entry_time for r in reports],
        "passed": True,  # evidence study; numbers are regression statistics
    }


def _study_plateau(cfg: RunConfig) -> dict:
    args = cfg.study_args
    t_list = [float(v) for v in args.get("t_list", [1, 2, 5, 10, 20, 30])]
    return experiments.moment_plateau_study(cfg.model.internal, t_list, cfg.n_paths,
                                            cfg.seed, dt=float(args.get("dt", 0.01)),
                                            workers=cfg.workers)


def _study_reflected_mean(cfg: RunConfig) -> dict:
    args = cfg.study_args
    m_list = [float(v) for v in args.get("m_list", [cfg.refl.m] if cfg.refl else [])]
    if not m_list:
        raise ConfigError("reflected_mean study needs m_list or model.m")
    t_list = [float(v) for v in args.get("t_list", [1, 5, 10, 20])]
    return experiments.reflected_mean_reversion_study(
        cfg.model.internal, m_list, t_list, cfg.n_paths, cfg.seed,
        dt=float(args.get("dt", 0.01)), workers=cfg.workers)


def _study_reflected_sup(cfg: RunConfig) -> dict:
    if cfg.refl is None:
        raise ConfigError("reflected_sup study needs model.m")
    return experiments.reflected_sup_moment_check(
        cfg.model.internal, cfg.refl, cfg.grid, cfg.n_paths, cfg.seed,
        p_exp=float(cfg.study_args.get("p_exp", 2.0)), workers=cfg.workers)


def _study_boundary_evidence(cfg: RunConfig) -> dict:
    return experiments.boundary_evidence_study(
        n_paths=cfg.n_paths, seed=cfg.seed,
        dt=float(cfg.study_args.get("dt", 0.01)), workers=cfg.workers)


def _study_explicit_consistency(cfg: RunConfig) -> dict:
    args = cfg.study_args
    return experiments.explicit_consistency_study(
        cfg.model.internal, n_paths=cfg.n_paths, seed=cfg.seed,
        t_end=float(args.get("t_end", 1.0)),
        n_steps_coarse=int(args.get("n_steps_coarse", 50)))


def _study_moment_check(cfg: RunConfig) -> dict:
    """Terminal mean (and second moment where closed-form) vs Monte Carlo."""
    p = cfg.model.internal
    est = experiments.estimate_moment(experiments.terminal_value, p, cfg.grid,
                                      cfg.n_paths, cfg.seed, workers=cfg.workers)
    target = analytics.mean_internal(p, cfg.grid.t_end)
    out = {
        "study": "moment_check",
        "mean": {"estimate": est.value, "std_error": est.std_error,
                 "target": target, "passed": est.within(target)},
    }
    if p.alpha2 in (0.5, 1.0):
        est2 = experiments.estimate_moment(experiments.terminal_power(2.0), p,
                                           cfg.grid, cfg.n_paths, cfg.seed,
                                           workers=cfg.workers)
        t2 = (analytics.second_moment_cir(p, cfg.grid.t_end) if p.alpha2 == 0.5
              else analytics.second_moment_linear(p, cfg.grid.t_end))
        out["second_moment"] = {"estimate": est2.value, "std_error": est2.std_error,
                                "target": t2, "passed": est2.within(t2)}
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    return out


def _study_lyapunov(cfg: RunConfig) -> dict:
    args = cfg.study_args
    k = float(args.get("k", 0.5))
    r0 = analytics.find_negativity_radius(cfg.model, k,
                                          r_start=float(args.get("r_start", 1.0)),
                                          grid_n=int(args.get("grid_n", 64)))
    scan = analytics.lyapunov_negativity_scan(cfg.model, k, r0) if r0 else None
    return {
        "study": "lyapunov",
        "k": k,
        "radius": r0,
        "max_generator_value": scan.max_value if scan else None,
        "covered_by_theory": scan.covered_by_theory if scan else None,
        "passed": r0 is not None,
    }


def _study_reflected_positivity(cfg: RunConfig) -> dict:
    return experiments.reflected_positivity_readings(
        cfg.model, cfg.n_paths, cfg.seed, cfg.grid, workers=cfg.workers)


STUDIES = {
    "density_fit": _study_density_fit,
    "comparison": _study_comparison,
    "occupancy": _study_occupancy,
    "plateau": _study_plateau,
    "reflected_mean": _study_reflected_mean,
    "reflected_sup": _study_reflected_sup,
    "boundary_evidence": _study_boundary_evidence,
    "explicit_consistency": _study_explicit_consistency,
    "moment_check": _study_moment_check,
    "lyapunov": _study_lyapunov,
    "reflected_positivity": _study_reflected_positivity,
}


def cmd_study(cfg: RunConfig) -> int:
    name = cfg.study
    if name not in STUDIES:
        raise ConfigError(f"unknown study {name!r}; known: {', '.join(sorted(STUDIES))}")
    _prepare_out_dir(cfg)
    report = STUDIES[name](cfg)
    io.write_json(cfg.out_dir / "report.json", report)
    io.write_json(cfg.out_dir / "manifest.json", cfg.manifest("study"))
    return EXIT_OK if report.get("passed", False) else EXIT_CRITERION


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmrsim",
                                 description="Double mean-reverting volatility: "
                                             "simulation, analytics, and studies")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--n-paths", dest="n_paths", type=int, default=None)
        sp.add_argument("--out-dir", dest="out_dir", default=None)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--svg", action="store_true", help="emit SVG figures")

    sp = sub.add_parser("simulate", help="write sample paths")
    common(sp)
    sp.add_argument("--binary", action="store_true", help="binary path table")
    sp.add_argument("--reflected", action="store_true",
                    help="simulate the reflected internal process (needs model.m)")

    sp = sub.add_parser("analytics", help="write closed-form tables and classification")
    common(sp)

    sp = sub.add_parser("study", help="run a registered study")
    common(sp)

    sub.add_parser("list-studies", help="print registered study names")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-studies":
        for name in sorted(STUDIES):
            print(name)
        return EXIT_OK
    try:
        cfg = load_config(args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "analytics":
            return cmd_analytics(cfg)
        return cmd_study(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DmrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
