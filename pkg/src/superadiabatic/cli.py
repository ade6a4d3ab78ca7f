"""Experiment runner: ``superadiabatic run <config.toml>``.

A config is a TOML file with a top-level ``kind`` and the tables
``model``, ``sweep``, ``observable``, ``tolerances`` and ``output``::

    kind = "adiabatic_error"

    [model]
    name = "driven_chain"      # two_level | driven_chain | rice_mele | chain | qwz | rice_mele_static
    M = [6]
    N = 3
    schedule = "flat"
    [model.params]             # keyword arguments of the model constructor
    flux = 1.5707963267948966

    [sweep]
    eps = [0.2, 0.1, 0.05]
    t = { start = 0.0, stop = 1.0, n = 41 }

    [observable]               # bond | number | pauli
    type = "bond"
    sites = [[0], [1]]
    coefficient = [1.0, 0.0]   # real and imaginary part

    [tolerances]
    tol_ode = 1e-8
    method = "cfm4"            # or "midpoint"
    eta_cluster = 1e-8
    g_min = 1e-6

    [output]
    path = "out.csv"
    json = "summary.json"      # optional

Columns per kind (the fixed record vocabulary)::

    adiabatic_error        experiment, M, eps, t, err0, err1
    superadiabatic_defect  experiment, M, eps, t, defect
    current_response       experiment, M, eps, t, k, current, relative, f1, f2, eigensum, discrepancy
    hall_conductivity      experiment, M, eps, t, measured, relative, predicted, discrepancy, persistent
    conductance            (same as hall_conductivity)
    lr_check               experiment, M, t, X, Y, lhs, rhs, rhs_exact, margin, pass
    norm_check             experiment, M, norm, phi_norm, ratio

``M = 0`` marks the two-level model, which has no lattice.  For the Hall
kinds ``eps`` is the slow rate and ``t`` the slow time.  Floats are written
with 17 significant digits.  Exit codes: 0 success, 1 numerical failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Iterator, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import NumericalFailure

log = logging.getLogger("superadiabatic")

JOBS_ENV = "SUPERADIABATIC_JOBS"

COLUMNS = {
    "adiabatic_error": ["experiment", "M", "eps", "t", "err0", "err1"],
    "superadiabatic_defect": ["experiment", "M", "eps", "t", "defect"],
    "current_response": [
        "experiment", "M", "eps", "t", "k", "current", "relative", "f1", "f2", "eigensum", "discrepancy",
    ],
    "hall_conductivity": ["experiment", "M", "eps", "t", "measured", "relative", "predicted", "discrepancy", "persistent"],
    "conductance": ["experiment", "M", "eps", "t", "measured", "relative", "predicted", "discrepancy", "persistent"],
    "lr_check": ["experiment", "M", "t", "X", "Y", "lhs", "rhs", "rhs_exact", "margin", "pass"],
    "norm_check": ["experiment", "M", "norm", "phi_norm", "ratio"],
}

TIME_DEPENDENT = {"two_level", "driven_chain", "rice_mele"}
STATIC = {"chain", "qwz", "rice_mele_static"}
ODD_M_OK = {"qwz"}


class UsageError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# ----------------------------------------------------------------------------
# validation


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise UsageError(f"{field}: {msg}")


def _grid(value: Any, field: str) -> list:
    if isinstance(value, dict):
        for k in ("start", "stop", "n"):
            _require(k in value, f"{field}.{k}", "missing")
        n = value["n"]
        _require(isinstance(n, int) and n >= 1, f"{field}.n", "must be a positive integer")
        return [float(x) for x in np.linspace(float(value["start"]), float(value["stop"]), n)]
    _require(isinstance(value, list) and len(value) > 0, field, "grid must be a non-empty list or {start, stop, n}")
    return [float(x) for x in value]


def validate(cfg: dict) -> dict:
    """Check the schema and return a normalized copy."""
    kind = cfg.get("kind")
    _require(kind in COLUMNS, "kind", f"must be one of {sorted(COLUMNS)}")
    model = cfg.get("model")
    _require(isinstance(model, dict), "model", "missing table")
    name = model.get("name")
    _require(name in TIME_DEPENDENT | STATIC, "model.name", f"must be one of {sorted(TIME_DEPENDENT | STATIC)}")
    params = model.get("params", {})
    _require(isinstance(params, dict), "model.params", "must be a table")
    if name == "two_level":
        Ms = [0]
    else:
        Ms = model.get("M")
        _require(isinstance(Ms, list) and len(Ms) > 0, "model.M", "must be a non-empty list")
        for i, M in enumerate(Ms):
            _require(isinstance(M, int) and M > 0, f"model.M[{i}]", "must be a positive integer")
            if name not in ODD_M_OK:
                _require(M % 2 == 0, f"model.M[{i}]", "must be even")
    sweep = cfg.get("sweep", {})
    out = {"kind": kind, "model": dict(model, params=params, M=Ms), "raw": cfg}

    if kind in ("adiabatic_error", "superadiabatic_defect", "current_response", "hall_conductivity", "conductance"):
        eps = sweep.get("eps")
        _require(isinstance(eps, list) and len(eps) > 0, "sweep.eps", "must be a non-empty list")
        for i, e in enumerate(eps):
            _require(isinstance(e, (int, float)) and 0 < e <= 1, f"sweep.eps[{i}]", "must lie in (0, 1]")
        out["eps"] = [float(e) for e in eps]
    _require("t" in sweep or kind == "norm_check", "sweep.t", "missing time grid")
    out["t"] = _grid(sweep["t"], "sweep.t") if "t" in sweep else []

    if kind in ("adiabatic_error", "superadiabatic_defect", "current_response"):
        _require(name in TIME_DEPENDENT, "model.name", f"{kind} needs a time-dependent model")
    if kind in ("hall_conductivity", "conductance", "lr_check", "norm_check"):
        _require(name in STATIC, "model.name", f"{kind} needs a static model")
    if kind in ("hall_conductivity", "conductance"):
        _require(name == "qwz", "model.name", "Hall experiments need the two-dimensional qwz model")
    if name != "two_level" and kind not in ("lr_check", "norm_check"):
        N = model.get("N")
        _require(isinstance(N, int) and N >= 0, "model.N", "particle number required")
    if kind == "lr_check":
        pairs = cfg.get("lr", {}).get("pairs")
        _require(isinstance(pairs, list) and len(pairs) > 0, "lr.pairs", "must be a non-empty list of [X, Y]")
        for i, p in enumerate(pairs):
            _require(isinstance(p, list) and len(p) == 2, f"lr.pairs[{i}]", "must be [X, Y]")
    tol = cfg.get("tolerances", {})
    _require(tol.get("method", "cfm4") in ("cfm4", "midpoint"), "tolerances.method", "must be cfm4 or midpoint")
    out["tol"] = {
        "tol_ode": float(tol.get("tol_ode", 1e-8)),
        "method": tol.get("method", "cfm4"),
        "eig_kw": {k: float(tol[k]) for k in ("eta_cluster", "g_min") if k in tol},
    }
    out["observable"] = cfg.get("observable", {})
    out["output"] = cfg.get("output", {})
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config: file {path!r} not found")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config: {exc}")
    return validate(raw)


# ----------------------------------------------------------------------------
# model construction


def _eig_kw(cfg):
    kw = {}
    if "eta_cluster" in cfg["tol"]["eig_kw"]:
        kw["eta"] = cfg["tol"]["eig_kw"]["eta_cluster"]
    if "g_min" in cfg["tol"]["eig_kw"]:
        kw["g_min"] = cfg["tol"]["eig_kw"]["g_min"]
    return kw


def _time_model(cfg, M):
    from .models import driven_chain, rice_mele, two_level_path
    from .propagate import Schedule

    m = cfg["model"]
    sched = Schedule(m.get("schedule", "flat"))
    p = dict(m["params"])
    if m["name"] == "two_level":
        return two_level_path(schedule=sched, **p), None, None
    build = {"driven_chain": driven_chain, "rice_mele": rice_mele}[m["name"]]
    return build(M, schedule=sched, **p), None, m.get("N")


def _static_model(cfg, M):
    from .interaction import build_tvw
    from .lattice import TorusLattice
    from .models import qwz, rice_mele_static

    m = cfg["model"]
    p = dict(m["params"])
    if m["name"] == "qwz":
        return qwz(M, **p)
    if m["name"] == "rice_mele_static":
        return rice_mele_static(M, **p)
    hop, U, mu = float(p.get("hop", 1.0)), float(p.get("U", 0.0)), float(p.get("mu", 0.0))
    lat = TorusLattice(int(p.get("d", 1)), M)
    d = lat.d
    table = {}
    for j in range(d):
        e = tuple(1 if i == j else 0 for i in range(d))
        table[e] = -hop
        table[tuple(-x for x in e)] = -hop
    return build_tvw(lat, table, pair={1: U} if U else None, mu=mu)


def _observable(cfg, tdi, sector):
    from .fock import number_operator
    from .interaction import assemble
    from .models import bond_hopping

    obs = cfg["observable"]
    typ = obs.get("type", "pauli" if sector is None else "bond")
    if sector is None:
        paulis = {
            "x": np.array([[0, 1], [1, 0]], dtype=complex),
            "y": np.array([[0, -1j], [1j, 0]]),
            "z": np.diag([1.0, -1.0]).astype(complex),
        }
        _require(typ == "pauli", "observable.type", "the two-level model takes a pauli observable")
        name = obs.get("name", "x")
        _require(name in paulis, "observable.name", "must be x, y or z")
        return paulis[name]
    lat = tdi.lattice
    sites = [tuple(s) for s in obs.get("sites", [[0] * lat.d, [1] + [0] * (lat.d - 1)])]
    if typ == "bond":
        _require(len(sites) == 2, "observable.sites", "a bond needs two sites")
        c = obs.get("coefficient", [1.0, 0.0])
        return assemble(bond_hopping(lat, sites[0], sites[1], complex(c[0], c[1]), 0, tdi.internal_dim), sector)
    if typ == "number":
        return number_operator(sites, sector)
    raise UsageError(f"observable.type: unknown observable {typ!r}")


# ----------------------------------------------------------------------------
# sweep points


def _points(cfg) -> list:
    kind = cfg["kind"]
    if kind in ("lr_check", "norm_check"):
        return [(M, None) for M in cfg["model"]["M"]] if kind == "lr_check" else [(None, None)]
    return [(M, e) for M in cfg["model"]["M"] for e in cfg["eps"]]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def run_point(cfg: dict, M, eps) -> list:
    """Compute the records of one sweep point; returns a list of row dicts."""
    from .adiabatic import AdiabaticFamily, defect
    from .fock import FockSector
    from .propagate import adiabatic_errors

    kind = cfg["kind"]
    tol = cfg["tol"]
    t = cfg["t"]
    eig_kw = _eig_kw(cfg)
    rows = []
    try:
        if kind in ("adiabatic_error", "superadiabatic_defect", "current_response"):
            model, _, N = _time_model(cfg, M)
            if cfg["model"]["name"] == "two_level":
                path, sector = model, None
            else:
                sector = FockSector(model.lattice, model.internal_dim, N)
                path = model.path(sector)
            if kind == "current_response":
                from .response import TwistedFamily, response_series

                _require(sector is not None, "model.name", "current_response needs a lattice model")
                fam = TwistedFamily.from_interaction(model, sector)
                recs = response_series(fam, eps, t, tol["tol_ode"], tol["method"], eig_kw=eig_kw, M=M)
                for r in recs:
                    es = r.diagnostics.get("eigensum", np.full(len(r.f1), np.nan))
                    for k in range(len(r.f1)):
                        rows.append(dict(experiment=kind, M=M, eps=eps, t=r.t, k=k, current=r.current[k],
                                         relative=r.relative[k], f1=r.f1[k], f2=r.f2[k], eigensum=es[k],
                                         discrepancy=abs(r.relative[k] - r.f1[k])))
                return rows
            fam = AdiabaticFamily(path, eig_kw=eig_kw)
            if kind == "adiabatic_error":
                B = _observable(cfg, model, sector)
                e0, e1 = adiabatic_errors(fam, B, eps, t, tol["tol_ode"], tol["method"])
                for ti, a, b in zip(t, e0, e1):
                    rows.append(dict(experiment=kind, M=M, eps=eps, t=ti, err0=a, err1=b))
            else:
                for ti, r in zip(t, defect(fam, eps, t)):
                    rows.append(dict(experiment=kind, M=M, eps=eps, t=ti, defect=r))
            return rows
        if kind in ("hall_conductivity", "conductance"):
            from .response import hall_experiment

            phi = _static_model(cfg, M)
            sector = FockSector(phi.lattice, phi.internal_dim, cfg["model"]["N"])
            res = hall_experiment(phi, sector, "conductivity" if kind == "hall_conductivity" else "conductance",
                                  rate=eps, s_grid=t, tol=tol["tol_ode"], method=tol["method"], eig_kw=eig_kw)
            for k, s in enumerate(res.s):
                rows.append(dict(experiment=kind, M=M, eps=eps, t=s, measured=res.measured[k],
                                 relative=res.relative[k], predicted=res.predicted[k],
                                 discrepancy=abs(res.relative[k] - res.predicted[k]), persistent=res.persistent[k]))
            return rows
        if kind == "lr_check":
            from .bounds import lr_check

            phi = _static_model(cfg, M)
            lr = cfg["raw"].get("lr", {})
            for X, Y in lr["pairs"]:
                rep = lr_check(phi, [tuple(x) for x in X], [tuple(y) for y in Y], t, a=float(lr.get("a", 1.0)))
                for s in rep.samples:
                    rows.append(dict(experiment=kind, M=M, t=s.t, X=" ".join(map(str, s.X)), Y=" ".join(map(str, s.Y)),
                                     lhs=s.lhs, rhs=s.rhs, rhs_exact=s.rhs_exact, margin=s.margin,
                                     **{"pass": s.margin >= -1e-9}))
            return rows
        if kind == "norm_check":
            from .bounds import norm_volume_check
            from .lattice import DecayFunction, LocalizationPlane

            nc = cfg["raw"].get("norm", {})
            plane = None
            if "plane_ell" in nc:
                plane = LocalizationPlane(tuple(nc["plane_ell"]), tuple(nc.get("anchor", [0] * len(nc["plane_ell"]))))
            rep = norm_volume_check(lambda m: _static_model(cfg, m), cfg["model"]["M"],
                                    DecayFunction.exponential(float(nc.get("a", 1.0))), plane)
            for m, a, b, r in zip(rep.Ms, rep.norms, rep.phi_norms, rep.ratios):
                rows.append(dict(experiment=kind, M=m, norm=a, phi_norm=b, ratio=r))
            return rows
    except NumericalFailure as exc:
        raise NumericalFailure(f"{type(exc).__name__} at M={M}, eps={eps}: {exc}") from exc
    raise UsageError(f"kind: unsupported kind {kind!r}")


def _run_point_star(args):
    return run_point(*args)


def iter_records(cfg: dict, jobs: int = 1) -> Iterator[list]:
    """Yield the rows of every sweep point in sweep order."""
    points = _points(cfg)
    if jobs <= 1 or len(points) <= 1:
        for M, eps in points:
            log.info("point M=%s eps=%s", M, eps)
            yield run_point(cfg, M, eps)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_run_point_star, [(cfg, M, e) for M, e in points])


def run(cfg: dict, output: Optional[str] = None, jobs: int = 1) -> int:
    """Run a validated config, writing rows as they complete.  Returns the exit code."""
    kind = cfg["kind"]
    cols = COLUMNS[kind]
    out_path = output or cfg["output"].get("path", f"{kind}.csv")
    summary = {"kind": kind, "rows": 0, "status": "ok"}
    code = 0
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        fh.flush()
        try:
            for rows in iter_records(cfg, jobs):
                for r in rows:
                    writer.writerow([_fmt(r[c]) for c in cols])
                summary["rows"] += len(rows)
                fh.flush()
        except NumericalFailure as exc:
            log.error("%s", exc)
            print(f"error: {exc}", file=sys.stderr)
            summary["status"] = f"numerical failure: {exc}"
            code = 1
    if "json" in cfg["output"]:
        with open(cfg["output"]["json"], "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="superadiabatic", description="Run adiabatic response experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="TOML experiment file")
    p_run.add_argument("--output", help="CSV path (overrides output.path)")
    p_run.add_argument("--jobs", type=int, default=None, help=f"worker processes (default ${JOBS_ENV} or 1)")
    p_run.add_argument("--verbose", action="store_true")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        jobs = args.jobs if args.jobs is not None else int(os.environ.get(JOBS_ENV, "1"))
        if jobs < 1:
            raise UsageError("--jobs: must be at least 1")
        cfg = load_config(args.config)
        return run(cfg, args.output, jobs)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
