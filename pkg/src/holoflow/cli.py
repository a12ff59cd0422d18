"""Command-line front end.

Every command reads one JSON config (``--config``), validates it against
``CONFIG_SCHEMA``, merges the defaults in, and writes its report files into
the output directory.  Reports embed the effective config, so re-running with
the embedded block reproduces the numbers.  stdout receives only the paths of
written files; diagnostics go to stderr.

Exit codes: 0 success, 2 invalid input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import math
import sys
from pathlib import Path as FsPath
from typing import Any, Callable, Sequence

import jsonschema
import numpy as np

from .algebra import ComplexPoly
from .errors import NumericFailure, ValidationError
from .flow import CrossRadius, EnterSingularBall, IntegrationBudget, integrate

log = logging.getLogger("holoflow")

CONFIG_VERSION = 1

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_COMPLEX = {
    "oneOf": [
        _NUM,
        {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
    ]
}
_UNIVARIATE = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}, "minItems": 1}
_BIVARIATE = {
    "oneOf": [
        {"type": "string", "minLength": 1},
        _NUM,
        {"type": "array", "items": _UNIVARIATE, "minItems": 1},
    ]
}
_RANGE = {"type": "array", "prefixItems": [_NUM, _NUM, {"type": "integer", "minimum": 1}], "items": False, "minItems": 3}


def _obj(props: dict, required: Sequence[str] = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


CONFIG_SCHEMA: dict = _obj(
    {
        "version": {"const": CONFIG_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "tolerances": _obj(
            {
                "rel_tol": {"oneOf": [_POS, {"type": "null"}]},
                "abs_tol": {"oneOf": [_POS, {"type": "null"}]},
                "scale": _POS,
            }
        ),
        "budget": _obj(
            {
                "max_time": {"oneOf": [_POS, {"type": "null"}]},
                "max_steps": {"type": "integer", "minimum": 1},
            }
        ),
        "field": _obj({"coefficients": _UNIVARIATE}, ["coefficients"]),
        "analyze": _obj({"direction": _COMPLEX, "radius": {"oneOf": [_POS, {"type": "null"}]}}),
        "unfolding": _obj(
            {
                "numerator": _BIVARIATE,
                "denominator": _BIVARIATE,
                "delta": _POS,
                "epsilon": _POS,
            },
            ["numerator"],
        ),
        "split": _obj({"instability": {"type": "boolean"}}),
        "portrait": _obj(
            {
                "direction": _COMPLEX,
                "grid": _obj({"re": _RANGE, "im": _RANGE}),
                "random_seeds": {"type": "integer", "minimum": 0},
                "max_time": _POS,
                "separatrices": {"type": "boolean"},
                "canvas": _obj(
                    {
                        "width": {"type": "integer", "minimum": 1},
                        "height": {"type": "integer", "minimum": 1},
                        "view": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
                    }
                ),
            }
        ),
        "longtraj": _obj(
            {
                "y_plus": _COMPLEX,
                "y_minus": _COMPLEX,
                "E_minus": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "s": {"type": "array", "items": _NUM, "minItems": 1},
                "samples": _obj({"n": {"type": "integer", "minimum": 2}, "t0": _POS}),
                "u_samples": {"oneOf": [{"type": "array", "items": _COMPLEX, "minItems": 2}, {"type": "null"}]},
                "frozen_gap": {"type": "boolean"},
                "trim_time": {"type": "number", "minimum": 0},
                "orbit": {
                    "oneOf": [
                        {"type": "null"},
                        _obj(
                            {
                                "delta": {"type": "number", "minimum": 0},
                                "order": {"type": "integer", "minimum": 1},
                                "frac": {"oneOf": [{"type": "number", "minimum": 0, "maximum": 1}, {"type": "null"}]},
                            }
                        ),
                    ]
                },
            }
        ),
        "conjugacy": _obj(
            {
                "a": _COMPLEX,
                "b": {"oneOf": [_COMPLEX, {"type": "null"}]},
                "h": {"oneOf": [{"type": "null"}, _obj({"s0": _COMPLEX, "s1": _COMPLEX}, ["s0", "s1"])]},
                "y0": {"oneOf": [_COMPLEX, {"type": "null"}]},
                "times": {"type": "array", "items": _POS, "minItems": 1},
                "csv": {"type": "boolean"},
            },
            ["a"],
        ),
    },
    ["version"],
)

REPORT_SCHEMA: dict = _obj(
    {
        "format": {"const": "holoflow-report"},
        "version": {"const": CONFIG_VERSION},
        "command": {"enum": ["analyze", "split", "portrait", "longtraj", "conjugacy"]},
        "config": CONFIG_SCHEMA,
        "result": {"type": "object"},
        "files": {"type": "array", "items": {"type": "string"}},
    },
    ["format", "version", "command", "config", "result"],
)

DEFAULTS: dict = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "output_dir": "out",
    "tolerances": {"rel_tol": None, "abs_tol": None, "scale": 1.0},
    "budget": {"max_time": None, "max_steps": 400_000},
    "analyze": {"direction": [1.0, 0.0], "radius": None},
    "split": {"instability": True},
    "portrait": {
        "direction": [1.0, 0.0],
        "grid": {"re": [-2.0, 2.0, 5], "im": [-2.0, 2.0, 5]},
        "random_seeds": 0,
        "max_time": 10.0,
        "separatrices": True,
        "canvas": {"width": 600, "height": 600, "view": [-3.0, 3.0, -3.0, 3.0]},
    },
    "longtraj": {
        "y_plus": [-0.3, 0.0],
        "y_minus": [0.3, 0.0],
        "E_minus": [0],
        "s": [0.0],
        "samples": {"n": 6, "t0": 0.1},
        "u_samples": None,
        "frozen_gap": False,
        "trim_time": 10.0,
        "orbit": None,
    },
    "conjugacy": {"b": None, "h": None, "y0": None, "times": [0.5, 1.0, 2.0], "csv": True},
}

# module defaults used when the config leaves a tolerance null
_TOL_DEFAULTS = {
    "analyze": (1e-10, 1e-12),
    "split": (1e-10, 1e-12),
    "portrait": (1e-10, 1e-12),
    "longtraj": (1e-10, 1e-12),
    "conjugacy": (1e-12, 1e-14),
}


# --------------------------------------------------------------------------
# config handling


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: Any) -> None:
    """Raise ValidationError naming the schema path of the first problem."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config invalid at {where}: {exc.message}") from None


def load_config(path: str | FsPath | None, overrides: dict | None = None) -> dict:
    raw: Any = {"version": CONFIG_VERSION}
    if path is not None:
        try:
            raw = json.loads(FsPath(path).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not JSON: {exc}") from None
    validate_config(raw)
    cfg = _merge(DEFAULTS, raw)
    if "conjugacy" in raw:
        cfg["conjugacy"] = _merge(DEFAULTS["conjugacy"], raw["conjugacy"])
    else:
        cfg.pop("conjugacy")
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k == "tol_scale":
            cfg["tolerances"]["scale"] = v
        else:
            cfg[k] = v
    validate_config(cfg)
    return cfg


def _resolve_tolerances(cfg: dict, command: str) -> tuple[float, float]:
    tol = cfg["tolerances"]
    rel0, abs0 = _TOL_DEFAULTS[command]
    if tol["rel_tol"] is None:
        tol["rel_tol"] = rel0
    if tol["abs_tol"] is None:
        tol["abs_tol"] = abs0
    f = tol["scale"]
    return tol["rel_tol"] * f, tol["abs_tol"] * f


def _c(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _require(cfg: dict, section: str, command: str) -> dict:
    if section not in cfg:
        raise ValidationError(f"config invalid at {section}: command '{command}' needs a '{section}' section")
    return cfg[section]


def _univariate(cfg: dict, command: str) -> ComplexPoly:
    table = _require(cfg, "field", command)["coefficients"]
    return ComplexPoly(tuple(complex(re, im) for re, im in table))


def _unfolding(cfg: dict, command: str):
    from .unfolding import load

    u = _require(cfg, "unfolding", command)

    return load(
        u["numerator"],
        u.get("denominator"),
        delta=u.get("delta", 0.1),
        epsilon=u.get("epsilon", 0.5),
    )


def _budget(cfg: dict, rel: float, abs_: float, default_time: float) -> IntegrationBudget:
    b = cfg["budget"]
    t = b["max_time"] if b["max_time"] is not None else default_time
    return IntegrationBudget(max_time=t, rel_tol=rel, abs_tol=abs_, max_steps=b["max_steps"])


# --------------------------------------------------------------------------
# emitters


def _clean(obj):
    """JSON-safe copy: complex to [re, im], non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


class Emitter:
    """Single writer for one command run; records every file it writes."""

    def __init__(self, out_dir: str | FsPath):
        self.dir = FsPath(out_dir)
        self.files: list[str] = []

    def _path(self, name: str) -> FsPath:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.files.append(str(p))
        return p

    def csv(self, name: str, header: Sequence[str], rows) -> None:
        with self._path(name).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt_cell(v) for v in r])

    def text(self, name: str, body: str) -> None:
        self._path(name).write_text(body)

    def report(self, command: str, cfg: dict, result: dict) -> dict:
        p = self._path(f"{command}.json")
        doc = {
            "format": "holoflow-report",
            "version": CONFIG_VERSION,
            "command": command,
            "config": cfg,
            "result": _clean(result),
            "files": [f for f in self.files if f != str(p)],
        }
        jsonschema.validate(doc, REPORT_SCHEMA)
        p.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
        return doc


def _fmt_cell(v) -> str:
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else "nan"
    return str(v)


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: dict, out: Emitter) -> dict:
    from .polyfield import _default_budget, analyze, candidate_directions, instability_directions, separatrix_diagram

    rel, abs_ = _resolve_tolerances(cfg, "analyze")
    Y = analyze(_univariate(cfg, "analyze"))
    budget = _budget(cfg, rel, abs_, _default_budget(Y).max_time)
    opts = cfg["analyze"]
    mu = _c(opts["direction"])
    if mu == 0:
        raise ValidationError("config invalid at analyze/direction: direction must be nonzero")
    diagram = separatrix_diagram(Y, mu, opts["radius"], budget)
    unstable = instability_directions(Y, budget)
    log.info("analyze: %d singular points, %d instability directions", len(Y.singularities), len(unstable))
    result = {
        "degree": Y.p.degree(),
        "nu": Y.nu,
        "singularities": [
            {
                "index": s.index,
                "location": s.location,
                "multiplicity": s.multiplicity,
                "residue": s.residue,
                "linear_part": s.linear_part,
                "kind": s.kind,
            }
            for s in Y.singularities
        ],
        "residue_sum": sum(Y.residues),
        "separatrix_diagram": diagram.to_json(),
        "candidate_directions": candidate_directions(Y),
        "instability_directions": unstable,
    }
    return out.report("analyze", cfg, result)


def cmd_split(cfg: dict, out: Emitter) -> dict:
    from .unfolding import dynamical_splitting, instability_set

    rel, abs_ = _resolve_tolerances(cfg, "split")
    X = _unfolding(cfg, "split")
    tree = dynamical_splitting(X)
    exps = sorted(n.e for n in tree.walk() if n.kind != "Exterior")
    result = {"field": X.to_json(), "tree": tree.to_json(), "exponents": exps}
    if cfg["split"]["instability"]:
        budget = _budget(cfg, rel, abs_, 400.0)
        result["instability_set"] = [
            {"lam": d.lam, "x_direction": d.x_direction, "source": d.source, "kind": d.kind}
            for d in instability_set(X, budget, tree)
        ]
    log.info("split: exponents %s", exps)
    return out.report("split", cfg, result)


class CanvasMap:
    """Affine map between the plane and SVG user units; y points down on screen."""

    def __init__(self, width: int, height: int, view: Sequence[float]):
        x0, x1, y0, y1 = (float(v) for v in view)
        if not (x1 > x0 and y1 > y0):
            raise ValidationError("config invalid at portrait/canvas/view: need xmin < xmax and ymin < ymax")
        self.width, self.height = int(width), int(height)
        self.view = (x0, x1, y0, y1)
        self.sx = self.width / (x1 - x0)
        self.sy = self.height / (y1 - y0)

    def to_canvas(self, w: complex) -> tuple[float, float]:
        x0, _, _, y1 = self.view
        return ((w.real - x0) * self.sx, (y1 - w.imag) * self.sy)

    def from_canvas(self, px: float, py: float) -> complex:
        x0, _, _, y1 = self.view
        return complex(x0 + px / self.sx, y1 - py / self.sy)

    def inside(self, w: complex, pad: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.view
        dx, dy = pad * (x1 - x0), pad * (y1 - y0)
        return x0 - dx <= w.real <= x1 + dx and y0 - dy <= w.imag <= y1 + dy


def _svg_paths(points: np.ndarray, cmap: CanvasMap) -> list[str]:
    """Path data for the visible stretches of a polyline."""
    out, cur = [], []
    for w in points:
        w = complex(w)
        if math.isfinite(w.real) and math.isfinite(w.imag) and cmap.inside(w, 0.25):
            px, py = cmap.to_canvas(w)
            cur.append(f"{px:.2f},{py:.2f}")
        elif cur:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return ["M" + " L".join(c) for c in out if len(c) > 1]


def render_svg(cmap: CanvasMap, trajectories, separatrices, singularities) -> str:
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cmap.width}" height="{cmap.height}" '
        f'viewBox="0 0 {cmap.width} {cmap.height}">',
        f'<rect x="0" y="0" width="{cmap.width}" height="{cmap.height}" fill="white"/>',
        '<g fill="none" stroke="#4a6fa5" stroke-width="0.8">',
    ]
    for pts in trajectories:
        for d in _svg_paths(pts, cmap):
            lines.append(f'<path d="{d}"/>')
    lines.append("</g>")
    lines.append('<g fill="none" stroke="#c0392b" stroke-width="1.8">')
    for pts in separatrices:
        for d in _svg_paths(pts, cmap):
            lines.append(f'<path class="separatrix" d="{d}"/>')
    lines.append("</g>")
    lines.append('<g stroke="black" stroke-width="0.8">')
    colors = {"attracting": "#2e86de", "repelling": "#e67e22", "indifferent": "#27ae60", "parabolic": "#8e44ad"}
    for s in singularities:
        if not cmap.inside(s.location):
            continue
        px, py = cmap.to_canvas(s.location)
        lines.append(
            f'<circle class="singularity" cx="{px:.2f}" cy="{py:.2f}" r="4" fill="{colors.get(s.kind, "gray")}"/>'
        )
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _axis(r: Sequence[float]) -> np.ndarray:
    return np.linspace(r[0], r[1], int(r[2]))


def cmd_portrait(cfg: dict, out: Emitter) -> dict:
    from .polyfield import analyze, separatrix_diagram

    rel, abs_ = _resolve_tolerances(cfg, "portrait")
    P = _univariate(cfg, "portrait")
    Y = analyze(P)
    opts = cfg["portrait"]
    cmap = CanvasMap(opts["canvas"]["width"], opts["canvas"]["height"], opts["canvas"]["view"])
    mu = _c(opts["direction"])
    if mu == 0:
        raise ValidationError("config invalid at portrait/direction: direction must be nonzero")
    mu /= abs(mu)
    budget = _budget(cfg, rel, abs_, opts["max_time"])
    seeds = [complex(a, b) for b in _axis(opts["grid"]["im"]) for a in _axis(opts["grid"]["re"])]
    rng = np.random.default_rng(cfg["seed"])
    x0, x1, y0, y1 = cmap.view
    for _ in range(opts["random_seeds"]):
        seeds.append(complex(rng.uniform(x0, x1), rng.uniform(y0, y1)))
    leave = CrossRadius(4.0 * max(abs(x0), abs(x1), abs(y0), abs(y1)), name="leave")
    balls = [EnterSingularBall(s.index, s.location, 1e-3, name=f"sing{s.index}") for s in Y.singularities]
    tracks, rows, summary = [], [], []
    for k, w0 in enumerate(seeds):
        if min(abs(w0 - z) for z in Y.locations) < 1e-3:
            continue
        for sign, tag in ((1, "fwd"), (-1, "bwd")):
            tr = integrate(P, sign * mu, w0, budget, events=(leave, *balls), fatou=False)
            tracks.append(tr.dense_points())
            first = True
            for t, re, im, ev in tr.to_csv_rows():
                if first:
                    ev = ev or f"start:{k}:{tag}"
                    first = False
                rows.append((sign * t, re, im, ev))
            last = tr.events[-1].kind if tr.events else tr.status
            rows[-1] = (*rows[-1][:3], rows[-1][3] or f"stop:{last}")
            summary.append({"seed": w0, "direction": tag, "status": tr.status, "end": tr.end, "time": tr.total_time})
    seps = []
    diagram = None
    if opts["separatrices"]:
        diagram = separatrix_diagram(Y, mu)
        seps = [s.samples for s in diagram.separatrices]
    out.csv("portrait.csv", ("t", "re_w", "im_w", "event"), rows)
    out.text("portrait.svg", render_svg(cmap, tracks, seps, Y.singularities))
    log.info("portrait: %d trajectories, %d separatrices", len(tracks), len(seps))
    result = {
        "direction": mu,
        "trajectories": summary,
        "singularities": [{"index": s.index, "location": s.location, "kind": Y.kind_for(s, mu)} for s in Y.singularities],
        "separatrix_diagram": diagram.to_json() if diagram else None,
    }
    return out.report("portrait", cfg, result)


_LT_HEADER = (
    "s", "n", "re_x", "im_x", "re_T", "im_T", "re_endpoint", "im_endpoint",
    "endpoint_error", "residue_discrepancy", "mid_max_abs_y",
)
_LO_HEADER = (
    "n", "re_x", "im_x", "iterations", "frac", "re_endpoint", "im_endpoint",
    "endpoint_error", "tracking_sup", "re_limit_value", "im_limit_value",
)


def cmd_longtraj(cfg: dict, out: Emitter) -> dict:
    from . import longtraj as lt

    rel, abs_ = _resolve_tolerances(cfg, "longtraj")
    X = _unfolding(cfg, "longtraj")
    opts = cfg["longtraj"]
    pair = lt.fatou_pair(X, _c(opts["y_plus"]), _c(opts["y_minus"]), X.epsilon)
    if opts["u_samples"] is not None:
        us = [_c(u) for u in opts["u_samples"]]
    else:
        us = lt.benchmark_u_samples(opts["samples"]["n"], opts["samples"]["t0"])
    budget = IntegrationBudget(rel_tol=rel, abs_tol=abs_, max_steps=cfg["budget"]["max_steps"])
    s_ref = opts["s"][0]
    spec_ref = lt.make_spec(X, pair, opts["E_minus"], s_ref, frozen_gap=opts["frozen_gap"])
    T_ref = lt.residue_T(spec_ref)
    reports, rows = [], []
    for s in opts["s"]:
        if s == s_ref:
            spec, samples = spec_ref, us
        else:
            spec = lt.make_spec(X, pair, opts["E_minus"], s, frozen_gap=opts["frozen_gap"])
            T = lt.residue_T(spec)
            samples = [lt.beta_point(T, s, T_ref(u).real, u) for u in us]
        rep = lt.run_long_trajectory(spec, u_samples=samples, budget=budget, trim_time=opts["trim_time"])
        reports.append(rep)
        for r in rep.to_csv_rows():
            rows.append((s, *(r[k] for k in _LT_HEADER[1:])))
    out.csv("longtraj.csv", _LT_HEADER, rows)
    result: dict = {
        "psi_gap": pair.psi_gap,
        "samples": us,
        "reports": [
            dict(rep.to_json(), time_of_flight=[r.T for r in rep.rows], endpoint_errors=[r.endpoint_error for r in rep.rows])
            for rep in reports
        ],
        "equivariance_gaps": {
            str(rep.s): lt.equivariance_gap(X, rep, reports[0]) for rep in reports[1:]
        },
    }
    orbit = opts["orbit"]
    if orbit is not None:
        delta = orbit.get("delta", 1e-3)
        order = orbit.get("order", 2)
        num, den = X.numerator, X.denominator
        pert: Callable | None = (lambda x, y: delta * num(x, y) ** order / den(x, y)) if delta else None
        phi = lt.DiscreteMap(X, pert, order)
        orep = lt.run_long_orbit(phi, spec_ref, us, frac=orbit.get("frac", 0.5))
        out.csv("longorbit.csv", _LO_HEADER, [tuple(r[k] for k in _LO_HEADER) for r in orep.to_csv_rows()])
        result["orbit"] = orep.to_json()
    log.info("longtraj: %d sweeps, final endpoint error %.3g", len(reports), reports[0].rows[-1].endpoint_error)
    return out.report("longtraj", cfg, result)


_CJ_HEADER = (
    "re_x", "im_x", "re_y", "im_y", "t", "re_sigma_of_flow", "im_sigma_of_flow",
    "re_flow_of_sigma", "im_flow_of_sigma", "gap",
)


def cmd_conjugacy(cfg: dict, out: Emitter) -> dict:
    from .conjugacy import ConjugacyProblem, RealLinearMap, build_sigma, verify_conjugacy

    rel, abs_ = _resolve_tolerances(cfg, "conjugacy")
    opts = _require(cfg, "conjugacy", "conjugacy")
    a = _c(opts["a"])
    kw = {}
    if opts["y0"] is not None:
        kw["y0"] = _c(opts["y0"])
    if opts["h"] is not None:
        h = RealLinearMap(_c(opts["h"]["s0"]), _c(opts["h"]["s1"]))
        P = ConjugacyProblem.from_h(a, h, **kw)
        if opts["b"] is not None and abs(P.b - _c(opts["b"])) > 1e-12 * max(1.0, abs(P.b)):
            raise ValidationError("config invalid at conjugacy/b: b disagrees with the given h")
    else:
        if opts["b"] is None:
            raise ValidationError("config invalid at conjugacy: give b or h")
        P = ConjugacyProblem.from_ab(a, _c(opts["b"]), **kw)
    budget = IntegrationBudget(rel_tol=rel, abs_tol=abs_, max_steps=cfg["budget"]["max_steps"])
    report = verify_conjugacy(P, build_sigma(P, rel, abs_), times=tuple(opts["times"]), budget=budget)
    if opts["csv"]:
        out.csv("conjugacy.csv", _CJ_HEADER, report.csv_rows())
    result = report.to_json()
    log.info("conjugacy: checks %s", ", ".join(f"{k}={'pass' if v else 'FAIL'}" for k, v in report.checks().items()))
    return out.report("conjugacy", cfg, result)


COMMANDS: dict[str, Callable[[dict, Emitter], dict]] = {
    "analyze": cmd_analyze,
    "split": cmd_split,
    "portrait": cmd_portrait,
    "longtraj": cmd_longtraj,
    "conjugacy": cmd_conjugacy,
}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holoflow", description="Polynomial vector fields and their unfoldings.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        p.add_argument("--config", metavar="PATH", help="JSON run config")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        p.add_argument("--seed", metavar="N", type=int, help="seed for randomized seeding")
        p.add_argument("--tol-scale", metavar="F", type=float, help="multiply every tolerance by F")
        p.add_argument("-v", "--verbose", action="store_true", help="debug diagnostics on stderr")
    p = sub.add_parser("schema", help="write the config and report JSON schemas")
    p.add_argument("--out", metavar="DIR", default=".", help="output directory")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "schema":
            em = Emitter(args.out)
            em.text("config.schema.json", json.dumps(CONFIG_SCHEMA, indent=2, sort_keys=True) + "\n")
            em.text("report.schema.json", json.dumps(REPORT_SCHEMA, indent=2, sort_keys=True) + "\n")
        else:
            if args.tol_scale is not None and not args.tol_scale > 0:
                raise ValidationError("--tol-scale must be positive")
            cfg = load_config(args.config, {"output_dir": args.out, "seed": args.seed, "tol_scale": args.tol_scale})
            em = Emitter(cfg["output_dir"])
            COMMANDS[args.command](cfg, em)
    except ValidationError as exc:
        log.error("%s", exc)
        return 2
    except NumericFailure as exc:
        log.error("numeric failure: %s", exc)
        return 3
    for f in em.files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
