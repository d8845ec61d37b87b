"""JSON/CSV serialization for operators, scenarios and computed reports.

Schemas (all JSON):

    background    {"period": N, "a": [..], "b": [..]}
    perturbation  {"window": [lo, hi], "a": [..], "b": [..]}
    scenario      {"background": .., "perturbation": .., <task parameters>}
    checkpoint    {"t": .., "window": [..], "a": [..], "b": [..],
                   "a_q": [..], "b_q": [..]}

CSV real numbers are written with 17 significant digits so identical inputs
produce byte-identical outputs and re-ingest losslessly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .background import BackgroundOperator, band_edges, EDGE_EXCLUSION
from .errors import ScatterError, SchemaError
from .perturbation import Perturbation, trivial_perturbation

_SCENARIO_KEYS = {
    "background",
    "perturbation",
    "z_grid",
    "lambda_grid",
    "epsilons",
    "band_nodes",
    "gap_samples",
    "pad",
    "orders",
    "moment_orders",
    "radius",
    "evolve",
}
_EVOLVE_KEYS = {"t_final", "dt", "times", "orders", "pad"}


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _require(cond: bool, message: str):
    if not cond:
        raise SchemaError(f"schema: {message}")


def _real_list(doc, key, where) -> list[float]:
    _require(isinstance(doc, (list, tuple)), f"{where}.{key} must be an array")
    out = []
    for v in doc:
        _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                 and math.isfinite(v), f"{where}.{key} entries must be finite numbers")
        out.append(float(v))
    return out


def load_background(doc: Any) -> BackgroundOperator:
    _require(isinstance(doc, dict), "background must be an object")
    _require(set(doc) == {"period", "a", "b"},
             "background keys must be exactly {period, a, b}")
    period = doc["period"]
    _require(isinstance(period, int) and not isinstance(period, bool),
             "background.period must be an integer")
    a = _real_list(doc["a"], "a", "background")
    b = _real_list(doc["b"], "b", "background")
    _require(len(a) == period and len(b) == period,
             "background coefficient arrays must have length = period")
    _require(all(x > 0.0 for x in a), "background.a must be positive")
    try:
        return BackgroundOperator(period, tuple(a), tuple(b))
    except ValueError as exc:
        raise SchemaError(f"schema: {exc}") from exc


def dump_background(bg: BackgroundOperator) -> dict:
    return {"period": bg.period, "a": list(bg.a), "b": list(bg.b)}


def load_perturbation(doc: Any, bg: BackgroundOperator) -> Perturbation:
    if doc is None:
        return trivial_perturbation(bg)
    _require(isinstance(doc, dict), "perturbation must be an object")
    _require(set(doc) == {"window", "a", "b"},
             "perturbation keys must be exactly {window, a, b}")
    window = doc["window"]
    _require(isinstance(window, (list, tuple)) and len(window) == 2
             and all(isinstance(n, int) and not isinstance(n, bool) for n in window),
             "perturbation.window must be a pair of integers")
    a = _real_list(doc["a"], "a", "perturbation")
    b = _real_list(doc["b"], "b", "perturbation")
    try:
        return Perturbation(bg, (window[0], window[1]), tuple(a), tuple(b))
    except ValueError as exc:
        raise SchemaError(f"schema: {exc}") from exc


def dump_perturbation(p: Perturbation) -> dict:
    return {"window": list(p.window), "a": list(p.a), "b": list(p.b)}


@dataclass(frozen=True)
class Scenario:
    background: BackgroundOperator
    perturbation: Perturbation
    params: dict = field(default_factory=dict)


def load_scenario(doc: Any) -> Scenario:
    """Validate a scenario document; raises SchemaError on any violation."""
    _require(isinstance(doc, dict), "scenario must be an object")
    unknown = set(doc) - _SCENARIO_KEYS
    _require(not unknown, f"unknown scenario keys {sorted(unknown)}")
    _require("background" in doc, "scenario.background is required")
    bg = load_background(doc["background"])
    p = load_perturbation(doc.get("perturbation"), bg)

    params: dict = {}
    if "z_grid" in doc:
        grid = doc["z_grid"]
        _require(isinstance(grid, list), "z_grid must be an array of [re, im] pairs")
        zs = []
        for row in grid:
            _require(isinstance(row, (list, tuple)) and len(row) == 2,
                     "z_grid entries must be [re, im] pairs")
            re, im = row
            for v in (re, im):
                _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                         and math.isfinite(v), "z_grid entries must be finite")
            zs.append(complex(re, im))
        params["z_grid"] = zs
    if "lambda_grid" in doc:
        lam = _real_list(doc["lambda_grid"], "lambda_grid", "scenario")
        edges = band_edges(bg).edges
        for x in lam:
            _require(min(abs(x - e) for e in edges) > EDGE_EXCLUSION,
                     f"lambda_grid point {x} inside band-edge exclusion zone")
        params["lambda_grid"] = lam
    if "epsilons" in doc:
        eps = _real_list(doc["epsilons"], "epsilons", "scenario")
        _require(all(e > 0 for e in eps), "epsilons must be positive")
        params["epsilons"] = eps
    for key, kind in (("band_nodes", int), ("gap_samples", int),
                      ("orders", int), ("moment_orders", int)):
        if key in doc:
            v = doc[key]
            _require(isinstance(v, int) and not isinstance(v, bool) and v > 0,
                     f"scenario.{key} must be a positive integer")
            params[key] = v
    for key in ("pad", "radius"):
        if key in doc and doc[key] is not None:
            v = doc[key]
            _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                     and math.isfinite(v) and v > 0,
                     f"scenario.{key} must be a positive number")
            params[key] = float(v)
    if "evolve" in doc:
        ev = doc["evolve"]
        _require(isinstance(ev, dict), "scenario.evolve must be an object")
        unknown = set(ev) - _EVOLVE_KEYS
        _require(not unknown, f"unknown evolve keys {sorted(unknown)}")
        out = {}
        for key in ("t_final", "dt"):
            if key in ev:
                v = ev[key]
                _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                         and math.isfinite(v) and v > 0,
                         f"evolve.{key} must be a positive number")
                out[key] = float(v)
        if "times" in ev:
            times = _real_list(ev["times"], "times", "evolve")
            _require(times == sorted(times) and all(t >= 0 for t in times),
                     "evolve.times must be sorted and nonnegative")
            out["times"] = times
        for key in ("orders", "pad"):
            if key in ev:
                v = ev[key]
                _require(isinstance(v, int) and not isinstance(v, bool) and v > 0,
                         f"evolve.{key} must be a positive integer")
                out[key] = v
        params["evolve"] = out
    return Scenario(bg, p, params)


def read_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"schema: cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema: malformed JSON: {exc}") from exc
    return load_scenario(doc)


# ---------------------------------------------------------------- documents

def spectrum_document(p: Perturbation) -> dict:
    from .perturbation import eigenvalues

    data = band_edges(p.background)
    return {
        "edges": [float(e) for e in data.edges],
        "genus": data.genus,
        "dirichlet": [float(m) for m in data.dirichlet],
        "eigenvalues": [float(r) for r in eigenvalues(p)],
    }


def spectrum_csv(doc: dict) -> str:
    lines = ["field,value"]
    for e in doc["edges"]:
        lines.append(f"edge,{fmt(e)}")
    lines.append(f"genus,{doc['genus']}")
    for m in doc["dirichlet"]:
        lines.append(f"dirichlet,{fmt(m)}")
    for r in doc["eigenvalues"]:
        lines.append(f"eigenvalue,{fmt(r)}")
    return "\n".join(lines) + "\n"


def _alpha_row(p: Perturbation, z: complex, excluded: bool, with_alpha: bool):
    from .krein import perturbation_determinant
    from .perturbation import alpha, alpha_asymptotics

    if excluded:
        nan = float("nan")
        vals = [z.real, z.imag] + [nan] * (5 if with_alpha else 2)
        return vals, "excluded"
    try:
        det = perturbation_determinant(p, z)
        if with_alpha:
            al = alpha(p, z)
            A = alpha_asymptotics(p).A
            gap = abs(A * al - det) / max(abs(det), 1e-300)
            return [z.real, z.imag, al.real, al.imag, det.real, det.imag, gap], "ok"
        return [z.real, z.imag, det.real, det.imag], "ok"
    except ScatterError:
        nan = float("nan")
        vals = [z.real, z.imag] + [nan] * (5 if with_alpha else 2)
        return vals, "failed"


def alpha_row(p: Perturbation, z: complex, excluded: bool):
    return _alpha_row(p, z, excluded, with_alpha=True)


def det_row(p: Perturbation, z: complex, excluded: bool):
    return _alpha_row(p, z, excluded, with_alpha=False)


def excluded_points(p: Perturbation, zs) -> list[bool]:
    """True where z is within the band-edge exclusion distance of the spectrum."""
    data = band_edges(p.background)
    out = []
    for z in zs:
        d = min(_dist_to_interval(z, lo, hi) for lo, hi in data.bands)
        out.append(d <= EDGE_EXCLUSION)
    return out


def _dist_to_interval(z: complex, lo: float, hi: float) -> float:
    x = min(max(z.real, lo), hi)
    return abs(z - x)


ALPHA_HEADER = "re_z,im_z,re_alpha,im_alpha,re_det,im_det,rel_gap,status"
DET_HEADER = "re_z,im_z,re_det,im_det,status"


def rows_to_csv(header: str, rows) -> str:
    lines = [header]
    for vals, status in rows:
        lines.append(",".join(fmt(v) for v in vals) + f",{status}")
    return "\n".join(lines) + "\n"


def rows_to_json(header: str, rows) -> dict:
    cols = header.split(",")
    out = []
    for vals, status in rows:
        row = {c: (float(v) if math.isfinite(v) else None)
               for c, v in zip(cols, vals)}
        row["status"] = status
        out.append(row)
    return {"rows": out}


def shift_csv(profile) -> str:
    lines = ["lambda,xi"]
    for lam, xi in zip(profile.grid, profile.xi):
        lines.append(f"{fmt(lam)},{fmt(xi)}")
    return "\n".join(lines) + "\n"


def traces_csv(doc: dict) -> str:
    lines = ["route,order,value"]
    for route in ("direct", "recursion", "moment"):
        for j, v in enumerate(doc[route]["taus"], start=1):
            lines.append(f"{route},{j},{fmt(v)}")
    return "\n".join(lines) + "\n"


def evolve_csv(report) -> str:
    header = ["t", "A"] + [f"tau_{j + 1}" for j in range(report.orders)]
    lines = [",".join(header)]
    for t, A, taus in zip(report.times, report.A, report.taus):
        lines.append(",".join([fmt(t), fmt(A)] + [fmt(x) for x in taus]))
    return "\n".join(lines) + "\n"


def checkpoint_document(state) -> dict:
    p = state.perturbation
    return {
        "t": float(state.time),
        "window": list(p.window),
        "a": list(p.a),
        "b": list(p.b),
        "a_q": list(state.background.a),
        "b_q": list(state.background.b),
    }


def jost_csv(sol) -> str:
    lines = ["n,re_psi,im_psi"]
    for n in sorted(sol.values):
        v = sol.values[n]
        lines.append(f"{n},{fmt(v.real)},{fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
