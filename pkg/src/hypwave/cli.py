"""Command line entry point and named experiment runner.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure or a
failed in-experiment check.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import scipy
import tomli

from . import __version__
from . import admissibility as adm
from . import cone_transform as cone
from . import inequality_lab as lab
from . import solver_euclidean as se
from . import solver_hyperbolic as sh
from .geometry import RadialGrid
from .operators import build_spectral

log = logging.getLogger("hypwave")

EXIT_OK, EXIT_SCHEMA, EXIT_NUMERIC = 0, 2, 3


class SchemaError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# --- parameter schemas ----------------------------------------------------------


@dataclass(frozen=True)
class Param:
    kind: str  # int, float, str, bool, list[float], list[int], list[str]
    default: Any
    help: str = ""
    choices: Optional[tuple] = None


def _coerce(name: str, spec: Param, value):
    def scalar(kind, v):
        if kind == "bool":
            if not isinstance(v, bool):
                raise SchemaError(f"{name}: expected a boolean, got {v!r}")
            return v
        if isinstance(v, bool):
            raise SchemaError(f"{name}: expected {kind}, got a boolean")
        if kind == "int":
            if not isinstance(v, int):
                raise SchemaError(f"{name}: expected an integer, got {v!r}")
            return v
        if kind == "float":
            if not isinstance(v, (int, float)):
                raise SchemaError(f"{name}: expected a number, got {v!r}")
            return float(v)
        if not isinstance(v, str):
            raise SchemaError(f"{name}: expected a string, got {v!r}")
        return v

    if spec.kind.startswith("list["):
        if not isinstance(value, list) or not value:
            raise SchemaError(f"{name}: expected a non-empty list")
        out = [scalar(spec.kind[5:-1], v) for v in value]
        bad = [v for v in out if spec.choices and v not in spec.choices]
    else:
        out = scalar(spec.kind, value)
        bad = [out] if spec.choices and out not in spec.choices else []
    if bad:
        raise SchemaError(f"{name}: {bad[0]!r} not in {list(spec.choices)}")
    return out


def validate_parameters(name: str, params: dict) -> dict:
    if name not in EXPERIMENTS:
        raise SchemaError(f"unknown experiment {name!r}; known: {sorted(EXPERIMENTS)}")
    exp = EXPERIMENTS[name]
    unknown = sorted(set(params) - set(exp.schema))
    if unknown:
        raise SchemaError(f"{name}: unknown parameter(s) {unknown}")
    merged = {k: (_coerce(k, p, params[k]) if k in params else p.default) for k, p in exp.schema.items()}
    if exp.check is not None:
        exp.check(merged)
    return merged


# --- output helpers -------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, Fraction):
        return str(x)
    return x


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def _pmap(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def versions() -> dict:
    return {"hypwave": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


# --- experiments ------------------------------------------------------------------


@dataclass
class Context:
    out: Path
    seed: int
    jobs: int
    outputs: list = field(default_factory=list)

    def csv(self, name, header, rows):
        self.outputs.append(write_csv(self.out / name, header, rows).name)

    def json(self, name, obj):
        self.outputs.append(write_json(self.out / name, obj).name)


def _series_rows(tr: sh.Trajectory):
    return zip(tr.times, tr.energy, tr.morawetz_acc, tr.M, tr.Mprime, tr.max_abs_u)


SERIES_HEADER = ("t", "energy", "morawetz_acc", "M", "Mprime", "max_abs_u")


def _drift(tr) -> float:
    return float(np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0]))


def run_energy_conservation(p: dict, ctx: Context) -> dict:
    cfg = sh.SimConfig(n=p["n"], p=p["p"], zeta=-1, r_max=p["r_max"], num_points=p["num_points"],
                       t_final=p["t_final"], u0=sh.Profile.gaussian(p["amplitude"], 0.0, p["width"]),
                       integrator=p["integrator"], snapshots=p["snapshots"])
    tr = sh.simulate(cfg)
    ctx.csv("series.csv", SERIES_HEADER, _series_rows(tr))
    snaps = tr.write_snapshots_csv(ctx.out / "snapshots")
    ctx.outputs.append(f"snapshots/ ({len(snaps)} files)")
    drift = _drift(tr)
    return {"status": tr.status, "energy": float(tr.energy[0]), "relative_drift": drift,
            "checks": {"completed": tr.completed, "drift_below_tol": drift <= p["drift_tol"]}}


MORAWETZ_FAMILIES = {
    "h3_gaussian_origin": (3, sh.Profile.gaussian(1.0, 0.0, 1.0), sh.Profile()),
    "h3_gaussian_shell": (3, sh.Profile.gaussian(1.0, 4.0, 1.0), sh.Profile()),
    "h3_shell_with_velocity": (3, sh.Profile.gaussian(0.5, 2.0, 0.5), sh.Profile.gaussian(0.5, 2.0, 0.5)),
    "h2_bump_origin": (2, sh.Profile.bump(2.0, 0.0, 2.0), sh.Profile()),
    "h2_velocity_only": (2, sh.Profile(), sh.Profile.gaussian(1.0, 0.0, 1.0)),
    "h2_gaussian_wide": (2, sh.Profile.gaussian(1.5, 0.0, 1.0), sh.Profile()),
}


def _morawetz_cell(args):
    name, p, r_max, num_points, t_final = args
    n, u0, u1 = MORAWETZ_FAMILIES[name]
    cfg = sh.SimConfig(n=n, p=p, zeta=-1, r_max=r_max, num_points=num_points, t_final=t_final, u0=u0, u1=u1)
    fwd, bwd = sh.simulate_both_directions(cfg)
    rep = sh.morawetz_report((fwd, bwd), float(fwd.energy[0]), p)
    ok = fwd.completed and bwd.completed
    return name, n, rep, ok


def _check_morawetz(p):
    if p["zeta"] != -1:
        raise SchemaError("morawetz_bound: bound claimed only for defocusing runs (zeta = -1)")
    for name in p["families"]:
        n = MORAWETZ_FAMILIES[name][0]
        if not p["p"] < sh.critical_p(n):
            raise SchemaError(f"morawetz_bound: p must be below the critical exponent for {name}")


def run_morawetz_bound(p: dict, ctx: Context) -> dict:
    cells = [(f, p["p"], p["r_max"], p["num_points"], p["t_final"]) for f in p["families"]]
    res = _pmap(_morawetz_cell, cells, ctx.jobs)
    ctx.csv("morawetz.csv", ("family", "n", "energy", "accumulator", "bound", "margin", "monotone", "completed"),
            [(f, n, r.energy, r.accumulator, r.bound, r.margin, r.monotone, ok) for f, n, r, ok in res])
    viol = sum(r.violated for _, _, r, _ in res)
    return {"violations": viol, "min_margin": min(r.margin for _, _, r, _ in res),
            "checks": {"no_violations": viol == 0, "all_completed": all(ok for *_, ok in res),
                       "monotone": all(r.monotone for _, _, r, _ in res)}}


def run_defocusing_scatter(p: dict, ctx: Context) -> dict:
    cfg = sh.SimConfig(n=p["n"], p=p["p"], zeta=-1, r_max=p["r_max"], num_points=p["num_points"],
                       t_final=p["t_final"], u0=sh.Profile.gaussian(p["amplitude"], 0.0, p["width"]),
                       integrator="spectral_splitting", snapshots=p["snapshots"])
    op = build_spectral(cfg.grid())
    tr = sh.simulate(cfg, op=op)
    ctx.csv("series.csv", SERIES_HEADER, _series_rows(tr))
    if not tr.completed:
        raise NumericalFailure(f"run ended with status {tr.status}")
    rep = sh.scattering_diagnostic(tr, op, sigma=p["sigma"])
    ctx.csv("increments.csv", ("t_start", "t_end", "increment"),
            zip(rep.times[:-1], rep.times[1:], rep.increments))
    return {"increments": rep.increments, "checks": {"cauchy_consistent": rep.consistent}}


def run_focusing_blowup(p: dict, ctx: Context) -> dict:
    base = sh.SimConfig(n=p["n"], p=p["p"], zeta=1, r_max=p["r_max"], num_points=p["num_points"],
                        t_final=p["t_final"], u0=sh.Profile.gaussian(1.0, 0.0, p["width"]))
    cfg = sh.scale_to_negative_energy(base, p["factor"])
    fwd, bwd = sh.simulate_both_directions(cfg)
    E = float(fwd.energy[0])
    out = {"energy": E, "amplitude": cfg.u0.amplitude, "checks": {"negative_energy": E < 0}}
    for tag, tr in (("forward", fwd), ("backward", bwd)):
        v = sh.virial_monitor(tr, E, p["p"])
        ctx.csv(f"virial_{tag}.csv", ("t", "energy", "M", "Mprime", "Msecond", "ratio_slope"),
                zip(tr.times, tr.energy, v.M, v.Mprime, v.Msecond, v.ratio_slope))
        out[tag] = {"status": tr.status, "status_time": tr.status_time, "max_slope": v.max_slope,
                    "window": v.window, "predicted_slope": v.predicted_slope}
        out["checks"][f"{tag}_blowup"] = tr.status == sh.BLOWUP
        out["checks"][f"{tag}_slope"] = bool(v.slope_ok)
    return out


def _decay_run(p, N, data):
    cfg = se.QuinticConfig(r_max=p["r_max"], num_points=N, t_final=p["t_final"], t_backward=p["t_backward"])
    return se.simulate_quintic(cfg, data.u0, data.u1, support=data.support)


def run_quintic_decay(p: dict, ctx: Context) -> dict:
    prof = se.DecayProfile(p["A"], p["eps"], p["R"], p["delta"])
    data = se.DecayingData(prof, r_cut=p["r_cut"])
    coarse = _decay_run(p, p["num_points"], data)
    fine = _decay_run(p, 2 * p["num_points"] - 1, data)
    ctx.csv("series.csv", ("t", "energy", "l6l6_acc"),
            zip(coarse.series_t, coarse.series_energy, coarse.l6l6_acc))
    b1 = se.decay_check(coarse, prof, fine, p["rel_tol"])
    der = se.derivative_decay_check(coarse, prof, fine, p["rel_tol"])
    names = ("u_sqrt_r", "weighted_characteristic", "incoming", "outgoing")
    reps = (b1, der.weighted_characteristic, der.incoming, der.outgoing)
    ctx.csv("constants.csv", ("quantity", "constant", "relative_change", "stable"),
            [(n, r.constant, r.relative_change, r.stable) for n, r in zip(names, reps)])
    res = [se.reduction_residual(t, prof.R) for t in (coarse, fine)]
    return {"constants": {n: r.constant for n, r in zip(names, reps)},
            "reduction_residual": [r.max_residual for r in res],
            "checks": {"finite": all(math.isfinite(r.constant) for r in reps),
                       "stable": all(bool(r.stable) for r in reps)}}


def run_cone_correspondence(p: dict, ctx: Context) -> dict:
    prof = se.DecayProfile(p["A"], p["eps"], 1.0)
    data = se.DecayingData(prof, r_cut=p["r_cut"])
    rows, res, slab = [], [], None
    N, k = p["num_points"], p["k"]
    for level in range(p["levels"]):
        cfg = se.QuinticConfig(r_max=p["r_max"], num_points=N, t_final=p["t_final"], t_backward=p["t_backward"])
        tr = se.simulate_quintic(cfg, data.u0, data.u1, support=data.support)
        sp = tr.interpolant()
        r = cone.shifted_wave_residual(sp, p["t0"], k=k)
        res.append(r.max_residual)
        rows.append((N, k, r.max_residual))
        N, k = 2 * N - 1, k / 2
    slab = cone.slab_identity(sp, p["t0"], (-1.0, 0.0), 2.0)
    grid = RadialGrid(2, p["s_max"], p["s_points"])
    st = cone.pushforward(sp, p["t0"], p["tau"], grid)
    ctx.csv("residuals.csv", ("num_points", "k", "max_residual"), rows)
    ctx.csv("pushforward.csv", ("s", "v", "v_tau"), zip(grid.points, st.u.values, st.ut.values))
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    return {"residuals": res, "ratios": ratios, "slab_relative_error": slab.relative,
            "checks": {"order_two": all(3.2 <= q <= 4.8 for q in ratios),
                       "slab_identity": slab.relative <= p["slab_tol"]}}


def _minsigma_cell(args):
    n, ps, tol = args
    rows = []
    for pv in ps:
        r = adm.min_sigma(pv, n, tol)
        cf = adm.sigma_closed_form(pv, n)
        s = cf.value if cf.attained else cf.value + Fraction(1, 10**9)
        eps = None
        if n == 2 and cf.row == "sigma_3":
            eps = min(2 - (1 - s) * (adm._as_fraction(pv) - 1), Fraction(1, 3)) / 2
        pair = adm.table_pair(pv, n, s, eps)
        good = pair is not None and adm.is_compatible(
            adm.PairQuery.from_exponents(pair[0], pair[1], n, s, adm._as_fraction(pv)))
        rows.append((n, pv, r.sigma, r.closed_form, abs(r.sigma - r.closed_form), cf.row,
                     r.witness[0], r.witness[1], good))
    return rows


def _p_sweep(n: int, count: int) -> list:
    hi = 9.0 if n == 2 else float(adm.critical_exponents(n).p_c)
    return [float(x) for x in np.linspace(1.0, hi, count + 2)[1:-1]]


def run_admissible_regions(p: dict, ctx: Context) -> dict:
    for n in p["dims"]:
        for s in p["sigmas"]:
            poly = adm.region_polygon(s, n)
            ctx.csv(f"region_n{n}_sigma{s:g}.csv", ("inv_p", "inv_q", "in_original", "on_open_boundary"),
                    ((float(a), float(b), c, d) for a, b, c, d in adm.lattice_rows(poly, Fraction(1, p["lattice"]))))
            ctx.csv(f"polygon_n{n}_sigma{s:g}.csv", ("inv_p", "inv_q", "edge_open"),
                    ((float(a), float(b), o) for (a, b), o in zip(poly.vertices, poly.open_edges)))
    cells = [(n, _p_sweep(n, p["p_samples"]), p["tol"]) for n in p["dims"]]
    rows = [r for block in _pmap(_minsigma_cell, cells, ctx.jobs) for r in block]
    ctx.csv("minsigma.csv", ("n", "p", "min_sigma", "closed_form", "abs_error", "row", "p1", "q1",
                             "table_pair_compatible"), rows)
    worst = max(r[4] for r in rows)
    return {"max_abs_error": worst,
            "checks": {"closed_forms": worst <= p["match_tol"], "table_pairs": all(r[8] for r in rows)}}


def _lemma_cell(args):
    name, samples, seed = args
    return lab.randomized_check(name, samples, seed)


def run_lemma_verification(p: dict, ctx: Context) -> dict:
    names = list(lab.LEMMAS) if "all" in p["lemmas"] else p["lemmas"]
    reps = _pmap(_lemma_cell, [(n, p["samples"], ctx.seed) for n in names], ctx.jobs)
    ctx.json("report.json", {r.lemma_id: r.to_dict() for r in reps})
    return {"max_ratio": {r.lemma_id: r.max_ratio for r in reps},
            "checks": {f"{r.lemma_id}_no_violations": r.passed for r in reps}}


@dataclass(frozen=True)
class Experiment:
    description: str
    anchors: tuple
    schema: dict
    runner: Callable
    check: Optional[Callable] = None


_LIN = ("leapfrog", "rk4", "spectral_splitting")

EXPERIMENTS: dict[str, Experiment] = {
    "energy_conservation": Experiment(
        "Defocusing radial run on H^n; tracks the conserved energy.",
        ("Theorem Morawetz2: the energy is constant",),
        {"n": Param("int", 3, choices=(2, 3, 4, 5, 6)), "p": Param("float", 3.0),
         "r_max": Param("float", 20.0), "num_points": Param("int", 2000), "t_final": Param("float", 10.0),
         "amplitude": Param("float", 1.0), "width": Param("float", 1.0),
         "integrator": Param("str", "leapfrog", choices=_LIN), "snapshots": Param("int", 64),
         "drift_tol": Param("float", 1e-4)},
        run_energy_conservation),
    "morawetz_bound": Experiment(
        "Space-time L^{p+1} accumulator against 4(p+1)/(p-1) times the energy, both time directions.",
        ("Theorem Morawetz1: Morawetz estimate with constant 4(p+1)/(p-1)",),
        {"p": Param("float", 3.0), "zeta": Param("int", -1, choices=(-1, 1)),
         "families": Param("list[str]", sorted(MORAWETZ_FAMILIES), choices=tuple(sorted(MORAWETZ_FAMILIES))),
         "r_max": Param("float", 32.0), "num_points": Param("int", 1601), "t_final": Param("float", 20.0)},
        run_morawetz_bound, _check_morawetz),
    "defocusing_scatter": Experiment(
        "Cauchy increments of the pulled-back linear profile at dyadic times.",
        ("Theorem localtheory (e): finite L^{p1}L^{q1} norm implies scattering",),
        {"n": Param("int", 3, choices=(2, 3, 4, 5, 6)), "p": Param("float", 3.0),
         "r_max": Param("float", 24.0), "num_points": Param("int", 1201), "t_final": Param("float", 16.0),
         "amplitude": Param("float", 1.0), "width": Param("float", 1.0), "sigma": Param("float", 0.5),
         "snapshots": Param("int", 65)},
        run_defocusing_scatter),
    "focusing_blowup": Experiment(
        "Negative-energy focusing data; blow-up in both directions and the virial slope of M/M'.",
        ("Appendix: blow-up of negative energy solutions, slope (1-p)/4",),
        {"n": Param("int", 3, choices=(2, 3, 4, 5, 6)), "p": Param("float", 3.0),
         "r_max": Param("float", 20.0), "num_points": Param("int", 2001), "t_final": Param("float", 10.0),
         "width": Param("float", 1.0), "factor": Param("float", 1.2)},
        run_focusing_blowup),
    "quintic_decay": Experiment(
        "Radial quintic wave on R^2 with decaying data; fitted pointwise decay constants.",
        ("Prop. pointwise-estimate", "Prop. lm3: characteristic derivative bounds"),
        {"A": Param("float", 1.0), "eps": Param("float", 0.5), "delta": Param("float", 0.09),
         "R": Param("float", 1.0), "r_cut": Param("float", 20.0), "r_max": Param("float", 60.0),
         "num_points": Param("int", 1201), "t_final": Param("float", 15.0), "t_backward": Param("float", 1.5),
         "rel_tol": Param("float", 0.2)},
        run_quintic_decay),
    "cone_correspondence": Experiment(
        "Push a quintic solution into the light cone and check the shifted wave equation on H^2.",
        ("Prop. translation: light-cone transform",),
        {"A": Param("float", 1.0), "eps": Param("float", 0.5), "r_cut": Param("float", 10.0),
         "t0": Param("float", -1.5), "r_max": Param("float", 24.0), "t_final": Param("float", 2.5),
         "t_backward": Param("float", 1.2), "num_points": Param("int", 601), "k": Param("float", 0.04),
         "levels": Param("int", 3), "tau": Param("float", -0.5), "s_max": Param("float", 2.0),
         "s_points": Param("int", 401), "slab_tol": Param("float", 1e-4)},
        run_cone_correspondence),
    "admissible_regions": Experiment(
        "Admissible regions on a lattice and minimal regularity against the tables.",
        ("Prop. newStri table", "Props. localn36 / localpgeq5n2: minimal regularity assumption"),
        {"dims": Param("list[int]", [2, 3, 4, 5, 6], choices=(2, 3, 4, 5, 6)),
         "sigmas": Param("list[float]", [0.25, 0.5, 0.75]), "lattice": Param("int", 40),
         "p_samples": Param("int", 50), "tol": Param("float", 1e-9), "match_tol": Param("float", 1e-6)},
        run_admissible_regions),
    "lemma_verification": Experiment(
        "Randomized quadrature checks of the circle, two-factor and three-factor integral bounds.",
        ("Lemma sphere", "Lemma lm03: C = 1/(1-k1) + 1/(k1+k2-1)", "Lemma lm2"),
        {"lemmas": Param("list[str]", ["all"], choices=("all",) + lab.LEMMAS), "samples": Param("int", 1000)},
        run_lemma_verification),
}


def _positive_checks(p: dict) -> None:
    for k in ("num_points", "samples", "p_samples", "levels", "lattice", "snapshots", "s_points"):
        if k in p and p[k] < 1:
            raise SchemaError(f"{k} must be positive")


def list_experiments() -> dict:
    return {
        name: {
            "description": e.description,
            "anchors": list(e.anchors),
            "parameters": {k: {"type": v.kind, "default": v.default, **({"choices": list(v.choices)} if v.choices else {})}
                           for k, v in e.schema.items()},
        }
        for name, e in sorted(EXPERIMENTS.items())
    }


def catalog_json() -> str:
    return json.dumps(list_experiments(), indent=2, sort_keys=True)


# --- running specs ------------------------------------------------------------------


@dataclass
class ExperimentSpec:
    name: str
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "results"

    @classmethod
    def from_toml(cls, path) -> "ExperimentSpec":
        try:
            with open(path, "rb") as fh:
                doc = tomli.load(fh)
        except (OSError, tomli.TOMLDecodeError) as exc:
            raise SchemaError(f"cannot read {path}: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        extra = sorted(set(doc) - {"name", "parameters", "seed", "output_dir"})
        if extra:
            raise SchemaError(f"unknown top-level key(s) {extra}")
        if not isinstance(doc.get("name"), str):
            raise SchemaError("spec needs a string 'name'")
        params = doc.get("parameters", {})
        seed = doc.get("seed", 0)
        if not isinstance(params, dict):
            raise SchemaError("'parameters' must be a table")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise SchemaError("'seed' must be an integer")
        return cls(doc["name"], params, seed, str(doc.get("output_dir", "results")))


@dataclass
class RunReport:
    exit_code: int
    name: str
    output_dir: Optional[Path]
    summary: dict
    message: str = ""


def run(spec: ExperimentSpec, jobs: int = 1) -> RunReport:
    """Validate, write the manifest, compute, then finalise the manifest."""
    try:
        params = validate_parameters(spec.name, spec.parameters)
        _positive_checks(params)
    except SchemaError as exc:
        return RunReport(EXIT_SCHEMA, spec.name, None, {}, str(exc))
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"experiment": spec.name, "parameters": params, "seed": spec.seed, "versions": versions(),
                "anchors": list(EXPERIMENTS[spec.name].anchors), "status": "running"}
    write_json(out / "manifest.json", manifest)
    ctx = Context(out, spec.seed, max(1, jobs))
    start = time.perf_counter()
    try:
        summary = EXPERIMENTS[spec.name].runner(params, ctx)
        checks = summary.get("checks", {})
        code = EXIT_OK if all(checks.values()) else EXIT_NUMERIC
        msg = "" if code == EXIT_OK else "failed checks: " + ", ".join(k for k, v in checks.items() if not v)
    except SchemaError as exc:
        summary, code, msg = {}, EXIT_SCHEMA, str(exc)
    except (NumericalFailure, sh.ConfigError, se.EuclideanError, cone.ConeError, adm.AdmissibilityError,
            lab.LemmaError, lab.QuadratureError, ValueError, FloatingPointError) as exc:
        summary, code, msg = {}, EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    manifest.update(status="ok" if code == EXIT_OK else "failed", exit_code=code, message=msg,
                    wall_time_s=round(time.perf_counter() - start, 3), outputs=ctx.outputs, summary=summary)
    write_json(out / "manifest.json", manifest)
    return RunReport(code, spec.name, out, summary, msg)


# --- argparse -------------------------------------------------------------------


def _profile(args, prefix):
    kind = getattr(args, f"{prefix}_kind")
    if kind == "zero":
        return sh.Profile()
    return sh.Profile(kind, getattr(args, f"{prefix}_amplitude"), getattr(args, f"{prefix}_center"),
                      getattr(args, f"{prefix}_width"))


def cmd_simulate(args) -> int:
    try:
        cfg = sh.SimConfig(n=args.n, p=args.p, zeta=args.zeta, r_max=args.r_max, num_points=args.num_points,
                           t_final=args.t_final, dt=args.dt, u0=_profile(args, "u0"), u1=_profile(args, "u1"),
                           nonlinear=not args.linear, integrator=args.integrator, snapshots=args.snapshots)
    except sh.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Path(args.out)
    write_json(out / "manifest.json", {"command": "simulate", "config": cfg.to_dict(), "versions": versions()})
    runs = sh.simulate_both_directions(cfg) if args.both_directions else (sh.simulate(cfg),)
    for tr in runs:
        tag = "forward" if tr.direction > 0 else "backward"
        if args.format == "json":
            write_json(out / f"series_{tag}.json", {k: list(v) for k, v in zip(SERIES_HEADER, zip(*_series_rows(tr)))})
        else:
            write_csv(out / f"series_{tag}.csv", SERIES_HEADER, _series_rows(tr))
            tr.write_snapshots_csv(out / f"snapshots_{tag}")
        print(json.dumps({"direction": tag, "status": tr.status, "status_time": tr.status_time,
                          "energy": float(tr.energy[0]), "relative_drift": _drift(tr)}))
    return EXIT_OK if all(tr.status != sh.CONTAMINATED for tr in runs) else EXIT_NUMERIC


def cmd_regions(args) -> int:
    try:
        poly = adm.region_polygon(args.sigma, args.n, args.open)
    except (adm.AdmissibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    rows = [(float(a), float(b), c, d) for a, b, c, d in adm.lattice_rows(poly, Fraction(1, args.lattice))]
    header = ("inv_p", "inv_q", "in_original", "on_open_boundary")
    if args.out:
        path = Path(args.out)
        if args.format == "json":
            write_json(path, {"regime": poly.regime, "vertices": [[float(a), float(b)] for a, b in poly.vertices],
                              "open_edges": poly.open_edges, "lattice": [dict(zip(header, r)) for r in rows]})
        else:
            write_csv(path, header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows([[_fmt(v) for v in r] for r in rows])
    return EXIT_OK


def cmd_minsigma(args) -> int:
    try:
        r = adm.min_sigma(args.p, args.n, args.tol)
    except (adm.AdmissibilityError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(json.dumps(_jsonable({"n": args.n, "p": args.p, "sigma": r.sigma, "closed_form": r.closed_form,
                                "attained": r.attained, "witness": {"p1": r.witness[0], "q1": r.witness[1]}}),
                     sort_keys=True))
    return EXIT_OK if r.agrees else EXIT_NUMERIC


def cmd_transform(args) -> int:
    try:
        prof = se.DecayProfile(args.A, args.eps, 1.0)
        data = se.DecayingData(prof, r_cut=args.r_cut)
        cfg = se.QuinticConfig(r_max=args.r_max, num_points=args.num_points, t_final=args.t_final,
                               t_backward=args.t_backward)
        grid = RadialGrid(2, args.s_max, args.s_points)
    except (se.EuclideanError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    out = Path(args.out)
    write_json(out / "manifest.json", {"command": "transform", "args": vars(args) | {"func": None},
                                       "versions": versions()})
    tr = se.simulate_quintic(cfg, data.u0, data.u1, support=data.support)
    sp = tr.interpolant()
    try:
        st = cone.pushforward(sp, args.t0, args.tau, grid)
        res = cone.shifted_wave_residual(sp, args.t0)
    except (cone.ConeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.format == "json":
        write_json(out / "pushforward.json", {"s": grid.points, "v": st.u.values, "v_tau": st.ut.values})
    else:
        write_csv(out / "pushforward.csv", ("s", "v", "v_tau"), zip(grid.points, st.u.values, st.ut.values))
    write_json(out / "residual.json", {"max_residual": res.max_residual, "k": res.k, "samples": res.samples})
    print(json.dumps({"max_residual": res.max_residual}))
    return EXIT_OK


def cmd_verify_lemmas(args) -> int:
    names = list(lab.LEMMAS) if args.lemma == "all" else [args.lemma]
    try:
        reps = _pmap(_lemma_cell, [(n, args.samples, args.seed) for n in names], args.jobs)
    except lab.LemmaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    doc = {r.lemma_id: r.to_dict() for r in reps}
    if args.out:
        write_json(Path(args.out), doc)
    for r in reps:
        print(f"{r.lemma_id}: samples={r.samples} max_ratio={r.max_ratio:.6f} violations={r.violations}")
    return EXIT_OK if all(r.passed for r in reps) else EXIT_NUMERIC


def cmd_run(args) -> int:
    try:
        spec = ExperimentSpec.from_toml(args.spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    if args.out:
        spec.output_dir = args.out
    if args.seed is not None:
        spec.seed = args.seed
    rep = run(spec, args.jobs)
    if rep.exit_code == EXIT_SCHEMA:
        print(f"error: {rep.message}", file=sys.stderr)
    else:
        print(json.dumps({"experiment": rep.name, "exit_code": rep.exit_code, "output_dir": str(rep.output_dir),
                          "message": rep.message}))
    return rep.exit_code


def cmd_list(args) -> int:
    if args.format == "json":
        print(catalog_json())
    else:
        for name, entry in list_experiments().items():
            print(f"{name}: {entry['description']}")
            print(f"    anchors: {'; '.join(entry['anchors'])}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypwave", description="Shifted wave equations on hyperbolic space.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default=None, fmt=True):
        p.add_argument("--out", default=out_default)
        p.add_argument("--seed", type=int, default=None if out_default is None else 0)
        p.add_argument("--jobs", type=int, default=1)
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="run the radial solver on H^n")
    common(p, "simulate_out")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--zeta", type=int, default=-1, choices=(-1, 1))
    p.add_argument("--r-max", type=float, default=20.0)
    p.add_argument("--num-points", type=int, default=2000)
    p.add_argument("--t-final", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--integrator", choices=sh.INTEGRATORS, default="leapfrog")
    p.add_argument("--snapshots", type=int, default=64)
    p.add_argument("--linear", action="store_true")
    p.add_argument("--both-directions", action="store_true")
    for pre, kind in (("u0", "gaussian"), ("u1", "zero")):
        p.add_argument(f"--{pre}-kind", choices=("zero", "gaussian", "bump"), default=kind)
        p.add_argument(f"--{pre}-amplitude", type=float, default=1.0)
        p.add_argument(f"--{pre}-center", type=float, default=0.0)
        p.add_argument(f"--{pre}-width", type=float, default=1.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regions", help="lattice of the admissible region")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--lattice", type=int, default=40, help="lattice points per unit of 1/p")
    p.add_argument("--open", action="store_true", help="treat the non-strict edges as open")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("minsigma", help="minimal regularity for (p, n)")
    common(p, fmt=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_minsigma)

    p = sub.add_parser("transform", help="push a quintic solution into the light cone")
    common(p, "transform_out")
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--r-cut", type=float, default=10.0)
    p.add_argument("--r-max", type=float, default=24.0)
    p.add_argument("--num-points", type=int, default=1201)
    p.add_argument("--t-final", type=float, default=2.5)
    p.add_argument("--t-backward", type=float, default=1.2)
    p.add_argument("--t0", type=float, default=-1.5)
    p.add_argument("--tau", type=float, default=-0.5)
    p.add_argument("--s-max", type=float, default=2.0)
    p.add_argument("--s-points", type=int, default=401)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify-lemmas", help="randomized checks of the integral bounds")
    common(p, fmt=False)
    p.add_argument("--lemma", choices=("all",) + lab.LEMMAS, default="all")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_verify_lemmas, seed=7)

    p = sub.add_parser("run", help="run a named experiment from a TOML spec")
    common(p, fmt=False)
    p.add_argument("spec")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="catalog of experiments")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    if getattr(args, "command", None) == "verify-lemmas" and args.samples < 1:
        print("error: --samples must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
