"""Command-line driver: ``livsic <command> --config cfg.json --out DIR``.

Every run writes ``report.json`` (config echo, module reports, warnings; the
``meta`` block holds the timestamp and timings and is the only part that
changes between identical runs) plus CSV / two-column plot data.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .circle import CircleDiffeo, DiffGroup, solve_transfer_diffeo
from .cocycles import (
    Generator,
    SuspensionGenerator,
    coboundary_from,
    cocycle_eval,
    flow_cocycle,
    generator_from_config,
)
from .config import COMMANDS, DEFAULT_GENERATOR, NAMED_SYSTEMS, ExperimentConfig, make_config, read_config_file
from .conformal import (
    build_conformal_structure,
    distortion_growth,
    metric_props_check,
    periodic_conformality_check,
    random_spd,
    uniform_distortion_experiment,
)
from .errors import ConfigParse, LivsicError, MissingSeries, ObstructionFails
from .lie_groups import MatrixGroup
from .periodic import closing_point, count_periodic, enumerate_periodic, orbit_points_json
from .solver import check_obstruction, recovery_error, flow_recovery_error, solve_transfer, solve_transfer_flow
from .torus import ToralAutomorphism, TorusPoint, build_toral

log = logging.getLogger("livsic")


@dataclass
class RunReport:
    config: dict
    reports: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    exit_code: int = 0

    def warn(self, kind: str, inequality: str, margin: float, message: str = "") -> None:
        self.warnings.append({"kind": kind, "inequality": inequality, "margin": float(margin), "message": message})

    def as_dict(self, with_meta: bool = True) -> dict:
        d = {
            "config": self.config,
            "reports": self.reports,
            "warnings": self.warnings,
            "series": {k: [list(map(float, row)) for row in v] for k, v in self.series.items()},
            "exit_code": self.exit_code,
        }
        if with_meta:
            d["meta"] = self.meta
        return d


# ---------------------------------------------------------------------------
# json helpers
# ---------------------------------------------------------------------------
def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _float(float(obj))
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, TorusPoint):
        return [_jsonable(v) for v in obj.as_fractions()] if obj.mode == "rational" else [float(v) for v in obj.float]
    if isinstance(obj, CircleDiffeo):
        return obj.as_dict()
    return obj


def _float(v: float):
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def dumps(report: RunReport, with_meta: bool = True) -> str:
    return json.dumps(_jsonable(report.as_dict(with_meta)), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------
def build_system(spec) -> ToralAutomorphism:
    if isinstance(spec, str):
        if spec == "conformal4":
            from .fixtures import conformal_fixture

            return conformal_fixture()
        return build_toral(NAMED_SYSTEMS[spec])
    if isinstance(spec, dict) and "matrix" in spec:
        return build_toral(spec["matrix"])
    return build_toral(spec)


def build_generator(cfg: ExperimentConfig, sys_: ToralAutomorphism) -> Generator:
    spec = cfg.generator or DEFAULT_GENERATOR
    try:
        return generator_from_config(spec, sys_)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigParse(f"bad generator spec: {exc}") from exc


def _set_threads(n: int | None) -> None:
    if not n:
        return
    try:
        import numba

        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover
        pass


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------
def _orbits(cfg, rep):
    sys_ = build_system(cfg.system)
    n_max = int(cfg.params.get("n_max", 6))
    counts = []
    for n in range(1, n_max + 1):
        counts.append([n, count_periodic(sys_, n)])
    rep.series["periodic_counts"] = counts
    out = {"counts": {str(n): c for n, c in counts}}
    list_max = int(cfg.params.get("list_max", min(n_max, 6)))
    orbits = enumerate_periodic(sys_, list_max)
    out["n_orbits_listed"] = len(orbits)
    out["orbits"] = [orbit_points_json(o) for o in orbits[: int(cfg.params.get("list_limit", 200))]]
    # enumerated point counts versus |det(A^n - I)|
    per_n = {}
    for n in range(1, list_max + 1):
        per_n[str(n)] = sum(o.period for o in orbits if n % o.period == 0)
    out["enumerated_point_counts"] = per_n
    rep.reports["orbits"] = out


def _close(cfg, rep):
    sys_ = build_system(cfg.system)
    x = cfg.params.get("x", [0.01, 0.02])
    n = int(cfg.params.get("n", 3))
    eps0 = float(cfg.params.get("eps0", 0.4))
    res = closing_point(sys_, TorusPoint.from_float(x), n, eps0)
    rep.reports["closing"] = {
        "p": res.p,
        "p_float": res.p.float,
        "z_float": res.z.float,
        "K_used": res.K_used,
        "delta": res.delta,
        "n": res.n,
        "bounds_ok": list(res.bounds_ok),
        "dist_x_p": res.dist_x_p,
        "dist_fnx_p": res.dist_fnx_p,
        "messenger_residual": res.messenger_residual,
    }


def _obstruction(cfg, rep):
    sys_ = build_system(cfg.system)
    gen = build_generator(cfg, sys_)
    r = check_obstruction(sys_, gen, int(cfg.params.get("n_max", 6)), float(cfg.params.get("tol", 1e-8)))
    rep.reports["obstruction"] = r.as_dict()
    return r


def _precheck(cfg, rep, sys_, gen) -> bool:
    r = check_obstruction(sys_, gen, int(cfg.params.get("obstruction_n_max", 4)), float(cfg.params.get("tol", 1e-8)))
    rep.reports["obstruction"] = {k: v for k, v in r.as_dict().items() if k != "per_orbit"}
    if not r.vanishes:
        rep.warn(
            "ObstructionFails",
            "d_G(Phi(p, period), Id) <= tol at every periodic point",
            r.max_defect - r.tol,
            f"worst orbit {r.worst_orbit}; solve not attempted",
        )
        rep.exit_code = ObstructionFails.exit_code
        return False
    return True


def _ladder(cfg) -> list[int]:
    L = cfg.params.get("L", [1000, 4000, 16000])
    return [int(v) for v in (L if isinstance(L, list) else [L])]


def _check_localization(rep, loc: dict) -> None:
    if not loc.get("holds_hyperbolicity", True):
        rep.warn("HyperbolicityViolated", "log rho + alpha log lambda < 0", loc["margin"], "solve attempted anyway; outside theorem")


def _solve(cfg, rep, diffeo: bool = False):
    sys_ = build_system(cfg.system)
    gen = build_generator(cfg, sys_)
    diffeo = diffeo or isinstance(gen.group, DiffGroup)
    if not _precheck(cfg, rep, sys_, gen):
        return
    grid_res = int(cfg.params.get("grid_res", 32 if diffeo else 64))
    rungs = []
    last = None
    for L in _ladder(cfg):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if diffeo:
                sol = solve_transfer_diffeo(sys_, gen, grid_res, L, r=int(cfg.params.get("r", 3)), seed=cfg.seed, precision_bits=cfg.precision_bits)
            else:
                sol = solve_transfer(sys_, gen, grid_res, L, seed=cfg.seed, precision_bits=cfg.precision_bits)
        entry = {"L": L, **sol.summary()}
        if gen.kind == "coboundary":
            entry["recovery_error"], _ = recovery_error(sol, gen.potential)
        rungs.append(entry)
        last = sol
    _check_localization(rep, last.localization)
    rep.reports["solve"] = {"grid_res": grid_res, "ladder": rungs}
    rep.series["residual_vs_coverage"] = sorted([r["coverage_radius"], r["residual"]] for r in rungs)
    rep.tables["solution"] = _solution_rows(last)


def _solution_rows(sol) -> list[list]:
    fY = (sol.grid_points @ sol.sys.A.T) % 1.0
    from .solver import _invariance_defects

    defects = _invariance_defects(sol, sol.metric)
    rows = []
    for i, y in enumerate(sol.grid_points):
        v = sol.grid_values[i]
        entries = list(v.coef.real[:3]) + list(v.coef.imag[1:3]) if isinstance(v, CircleDiffeo) else list(np.ravel(v))
        rows.append([*map(float, y), *map(float, entries), float(defects[i])])
    return rows


def _flowsolve(cfg, rep):
    sys_ = build_system(cfg.system)
    gen = build_generator(cfg, sys_)
    if not isinstance(gen.group, MatrixGroup):
        raise ConfigParse("flowsolve needs a matrix group")
    mode = cfg.params.get("suspension", "coboundary" if gen.kind == "coboundary" else "interpolating")
    if mode == "coboundary":
        sgen = SuspensionGenerator.flow_coboundary(sys_, gen.potential)
    elif mode == "zero":
        sgen = SuspensionGenerator.zero(gen.group)
    else:
        sgen = SuspensionGenerator.interpolating(gen)
    grid_res = int(cfg.params.get("grid_res", 32))
    dt = float(cfg.params.get("dt", 1e-2))
    rungs = []
    for L in _ladder(cfg):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sol = solve_transfer_flow(sys_, sgen, grid_res, L, n_slices=int(cfg.params.get("slices", 4)), dt=dt, seed=cfg.seed)
        entry = {"L": L, **sol.summary()}
        if mode == "coboundary":
            entry["recovery_error"] = flow_recovery_error(sol, sgen.potential)
        rungs.append(entry)
        last = sol
    loc = last.localization
    if not loc["holds_hyperbolicity"]:
        rep.warn("HyperbolicityViolated", "rho - alpha lambda_flow < 0", loc["margin"], "solve attempted anyway")
    rep.reports["flowsolve"] = {"grid_res": grid_res, "mode": mode, "ladder": rungs}
    rep.series["residual_vs_coverage"] = sorted([r["coverage_radius"], r["residual"]] for r in rungs)


def _distortion(cfg, rep):
    sys_ = build_system(cfg.system)
    N = int(cfg.params.get("N", 40))
    metric = cfg.params.get("metric", "background")
    r = distortion_growth(sys_, N, metric=metric, n_max_per=int(cfg.params.get("n_max_per", 6)))
    rep.reports["distortion"] = r.as_dict()
    rep.reports["uniform"] = uniform_distortion_experiment(sys_, N)
    rep.series["distortion_growth"] = [[n + 1, math.log(k)] for n, k in enumerate(r.K_per_n)]
    rep.tables["distortion"] = [[n + 1, k] for n, k in enumerate(r.K_per_n)]


def _conformal(cfg, rep):
    sys_ = build_system(cfg.system)
    seed_kind = cfg.params.get("seed_form", "eigen")
    seed_form = None
    if seed_kind == "random":
        seed_form = random_spd(sys_.dim_s, np.random.default_rng(cfg.seed))
    field_ = build_conformal_structure(
        sys_, int(cfg.params.get("grid_res", 8)), int(cfg.params.get("L", 5000)), seed_form=seed_form, seed=cfg.seed
    )
    rep.reports["conformal"] = field_.summary()
    rep.reports["periodic_conformality"] = periodic_conformality_check(sys_, int(cfg.params.get("n_max", 6)))
    rep.reports["forms"] = field_.forms_json() if cfg.params.get("dump_forms", False) else None
    rep.series["seed_distance"] = [[n, d] for n, d in enumerate(field_.seed_distance_track)]
    if field_.hypothesis_scalar_defect > 1e-9:
        rep.warn(
            "ScalarHypothesisFails",
            "Df^N|E^s = gamma Id at periodic points",
            field_.hypothesis_scalar_defect,
            "construction verified on its output only",
        )


def _proptest(cfg, rep):
    rng = np.random.default_rng(cfg.seed)
    n = int(cfg.params.get("samples", 1000))
    sys_ = build_system(cfg.system)
    out = {"metric_props": metric_props_check(n, rng)}
    gen = build_generator(cfg, sys_)
    g = gen.group
    worst = 0.0
    for _ in range(int(cfg.params.get("cocycle_samples", 50))):
        x = TorusPoint.fixed(rng.random(sys_.dim), 256)
        m, k = (int(v) for v in rng.integers(-10, 11, size=2))
        lhs = cocycle_eval(sys_, gen, x, m + k)
        from .torus import apply

        rhs = g.mul(cocycle_eval(sys_, gen, apply(sys_, x, k), m), cocycle_eval(sys_, gen, x, k))
        worst = max(worst, float(g.dist(lhs, rhs)))
    out["cocycle_identity_max_defect"] = worst
    out["passed"] = bool(worst <= 1e-9 and out["metric_props"]["determinant_violations"] == 0)
    rep.reports["proptest"] = out


PIPELINES = {
    "orbits": _orbits,
    "close": _close,
    "obstruction": _obstruction,
    "solve": _solve,
    "flowsolve": _flowsolve,
    "diffsolve": lambda cfg, rep: _solve(cfg, rep, diffeo=True),
    "distortion": _distortion,
    "conformal": _conformal,
    "proptest": _proptest,
}


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunReport:
    """Dispatch a configured run; write the report and data files when out_dir is given."""
    cfg.validate()
    _set_threads(cfg.threads)
    rep = RunReport(config=cfg.as_dict())
    t0 = time.perf_counter()
    PIPELINES[cfg.command](cfg, rep)
    rep.meta = {
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "elapsed_s": time.perf_counter() - t0,
        "version": __version__,
    }
    if out_dir is not None:
        write_outputs(rep, out_dir)
    return rep


def write_outputs(rep: RunReport, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(rep) + "\n")
    for name, rows in rep.tables.items():
        with open(out / f"{name}.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    for kind in rep.series:
        emit_plot_data(rep, kind, out)


def emit_plot_data(rep: RunReport, kind: str, out_dir: str | Path) -> Path:
    """Write a two-column text file ``<kind>.dat`` from the report's series."""
    rows = rep.series.get(kind)
    if not rows:
        raise MissingSeries(f"report has no series {kind!r}")
    path = Path(out_dir) / f"{kind}.dat"
    with open(path, "w") as fh:
        fh.write(f"# {kind}\n")
        for row in rows:
            fh.write(" ".join(repr(float(v)) for v in row[:2]) + "\n")
    return path


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="livsic", description="Numerical lab for cocycles over hyperbolic toral automorphisms.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON or YAML config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--precision-bits", type=int, default=None, dest="precision_bits")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        data = read_config_file(args.config) if args.config else {}
        cfg = make_config(args.command, data, seed=args.seed, threads=args.threads, precision_bits=args.precision_bits)
        rep = run(cfg, args.out)
    except LivsicError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    for w in rep.warnings:
        print(f"warning [{w['kind']}]: {w['inequality']} (margin {w['margin']:.4g}) {w['message']}", file=sys.stderr)
    if args.out is None:
        print(dumps(rep))
    return rep.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
