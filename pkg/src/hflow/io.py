"""Run configuration and file output: OBJ frames, CSV traces, JSON reports."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .curvature import curvature_from_dict
from .curve import circle_curve, curve_from_samples
from .errors import SchemaError
from .flow import TRACE_COLUMNS, ConvergenceConfig, FlowConfig, FlowTrace, InnerConfig
from .mesh import build_disk_mesh
from .obstacle import obstacle_from_dict


# ------------------------------------------------------------ schema helpers

def _number(key, x, lo=None, hi=None, lo_open=False, hi_open=False, allow_inf=False):
    if isinstance(x, str) and allow_inf and x.lower() in ("inf", "infinity"):
        x = math.inf
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(key, "must be a number")
    x = float(x)
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise SchemaError(key, "must be finite")
    if lo is not None and (x < lo or (lo_open and x == lo)):
        raise SchemaError(key, _range_text(lo, hi, lo_open, hi_open))
    if hi is not None and (x > hi or (hi_open and x == hi)):
        raise SchemaError(key, _range_text(lo, hi, lo_open, hi_open))
    return x


def _range_text(lo, hi, lo_open, hi_open):
    if lo is not None and hi is not None:
        return f"must lie in {'(' if lo_open else '['}{lo:g},{hi:g}{')' if hi_open else ']'}"
    if lo is not None:
        return f"must be {'>' if lo_open else '>='} {lo:g}"
    return f"must be {'<' if hi_open else '<='} {hi:g}"


def _integer(key, x, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        if isinstance(x, float) and x.is_integer():
            x = int(x)
        else:
            raise SchemaError(key, "must be an integer")
    if lo is not None and x < lo:
        raise SchemaError(key, f"must be >= {lo}")
    return x


def _vector(key, x, n):
    if not isinstance(x, (list, tuple)) or len(x) != n:
        raise SchemaError(key, f"must be a list of {n} numbers")
    return [_number(f"{key}[{i}]", v) for i, v in enumerate(x)]


def _section(d, key, allowed):
    if d is None:
        return {}
    if not isinstance(d, dict):
        raise SchemaError(key, "must be an object")
    for k in d:
        if k not in allowed:
            raise SchemaError(f"{key}.{k}" if key else k, "unknown key")
    return d


# ------------------------------------------------------------ RunConfig

@dataclass
class InitialSurface:
    """Harmonic extension of the boundary plus an optional interior bump."""

    bump_height: float = 0.0
    bump_center: list = field(default_factory=lambda: [0.0, 0.0])
    bump_radius: float = 0.6


@dataclass
class RunConfig:
    n_boundary: int = 96
    n_rings: int = 16
    curve_file: str | None = None  # None: unit circle sampled at n_boundary points
    obstacle: dict = field(default_factory=lambda: {"type": "all"})
    H: dict = field(default_factory=lambda: {"type": "constant", "value": 0.0})
    flow: FlowConfig = field(default_factory=FlowConfig)
    initial: InitialSurface = field(default_factory=InitialSurface)
    output_directory: str = "hflow_out"
    cadence: int = 0
    override: bool = False
    base_dir: str = field(default=".", compare=False, repr=False)

    @property
    def c(self) -> float:
        return self.flow.c

    @property
    def s(self) -> float:
        return self.flow.s

    def to_dict(self) -> dict:
        flow = self.flow.to_dict()
        iso = {"c": flow.pop("c"), "s": flow.pop("s")}
        flow.pop("cadence")
        return {
            "mesh": {"n_boundary": self.n_boundary, "n_rings": self.n_rings},
            "curve_file": self.curve_file,
            "obstacle": dict(self.obstacle),
            "H": dict(self.H),
            "isoperimetric": iso,
            "flow": flow,
            "initial": asdict(self.initial),
            "output": {"directory": self.output_directory, "cadence": self.cadence},
            "override": self.override,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    # builders
    def build_mesh(self):
        return build_disk_mesh(self.n_boundary, self.n_rings)

    def build_curve(self):
        if self.curve_file is None:
            return circle_curve(self.n_boundary)
        path = Path(self.curve_file)
        if not path.is_absolute():
            path = Path(self.base_dir) / path
        return load_curve(path)

    def build_obstacle(self):
        return obstacle_from_dict(self.obstacle)

    def build_H(self):
        return curvature_from_dict(self.H)

    def output_path(self) -> Path:
        p = Path(self.output_directory)
        return p if p.is_absolute() else Path(self.base_dir) / p


_TOP = ("mesh", "curve_file", "obstacle", "H", "isoperimetric", "flow", "initial", "output",
        "override")


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> RunConfig:
    """Validate a JSON configuration; every missing field takes its default."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("<root>", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise SchemaError("<root>", "must be an object")
    _section(raw, "", _TOP)
    cfg = RunConfig(base_dir=str(base_dir))

    mesh = _section(raw.get("mesh"), "mesh", ("n_boundary", "n_rings"))
    if "n_boundary" in mesh:
        nb = _integer("mesh.n_boundary", mesh["n_boundary"], lo=6)
        if nb % 3:
            raise SchemaError("mesh.n_boundary", "must be divisible by 3")
        cfg.n_boundary = nb
    if "n_rings" in mesh:
        cfg.n_rings = _integer("mesh.n_rings", mesh["n_rings"], lo=1)

    curve_file = raw.get("curve_file")
    if curve_file is not None and not isinstance(curve_file, str):
        raise SchemaError("curve_file", "must be a path string or null")
    cfg.curve_file = curve_file

    if "obstacle" in raw:
        cfg.obstacle = _parse_obstacle(raw["obstacle"])
    if "H" in raw:
        cfg.H = _parse_H(raw["H"])

    iso = _section(raw.get("isoperimetric"), "isoperimetric", ("c", "s"))
    c = _number("isoperimetric.c", iso.get("c", 1.0 / 3.0), 0.0, 1.0, True, True)
    s = _number("isoperimetric.s", iso.get("s", math.inf), 0.0, None, lo_open=True,
                allow_inf=True)

    fl = _section(raw.get("flow"), "flow", ("h", "max_steps", "inner", "convergence", "n_test",
                                            "q_s", "q_x"))
    inner_raw = _section(fl.get("inner"), "flow.inner", tuple(InnerConfig.__dataclass_fields__))
    conv_raw = _section(fl.get("convergence"), "flow.convergence",
                        tuple(ConvergenceConfig.__dataclass_fields__))
    d_in, d_conv, d_flow = InnerConfig(), ConvergenceConfig(), FlowConfig()
    inner = InnerConfig(
        max_iters=_integer("flow.inner.max_iters", inner_raw.get("max_iters", d_in.max_iters), 1),
        grad_tol=_number("flow.inner.grad_tol", inner_raw.get("grad_tol", d_in.grad_tol),
                         0.0, lo_open=True),
        armijo_c=_number("flow.inner.armijo_c", inner_raw.get("armijo_c", d_in.armijo_c),
                         0.0, 1.0, True, True),
        step_shrink=_number("flow.inner.step_shrink",
                            inner_raw.get("step_shrink", d_in.step_shrink), 0.0, 1.0, True, True),
        init_step=_number("flow.inner.init_step", inner_raw.get("init_step", d_in.init_step),
                          0.0, lo_open=True),
    )
    conv = ConvergenceConfig(
        dt_tol=_number("flow.convergence.dt_tol", conv_raw.get("dt_tol", d_conv.dt_tol),
                       0.0, lo_open=True),
        hopf_tol=_number("flow.convergence.hopf_tol", conv_raw.get("hopf_tol", d_conv.hopf_tol),
                         0.0, lo_open=True),
    )
    out = _section(raw.get("output"), "output", ("directory", "cadence"))
    if "directory" in out:
        if not isinstance(out["directory"], str) or not out["directory"]:
            raise SchemaError("output.directory", "must be a non-empty string")
        cfg.output_directory = out["directory"]
    cfg.cadence = _integer("output.cadence", out.get("cadence", 0), 0)

    cfg.flow = FlowConfig(
        h=_number("flow.h", fl.get("h", d_flow.h), 0.0, lo_open=True),
        max_steps=_integer("flow.max_steps", fl.get("max_steps", d_flow.max_steps), 0),
        inner=inner, convergence=conv, c=c, s=s, cadence=cfg.cadence,
        n_test=_integer("flow.n_test", fl.get("n_test", d_flow.n_test), 1),
        q_s=_integer("flow.q_s", fl.get("q_s", d_flow.q_s), 1),
        q_x=_integer("flow.q_x", fl.get("q_x", d_flow.q_x), 1),
    )

    ini = _section(raw.get("initial"), "initial", ("bump_height", "bump_center", "bump_radius"))
    cfg.initial = InitialSurface(
        bump_height=_number("initial.bump_height", ini.get("bump_height", 0.0)),
        bump_center=_vector("initial.bump_center", ini.get("bump_center", [0.0, 0.0]), 2),
        bump_radius=_number("initial.bump_radius", ini.get("bump_radius", 0.6), 0.0,
                            lo_open=True),
    )
    ov = raw.get("override", False)
    if not isinstance(ov, bool):
        raise SchemaError("override", "must be true or false")
    cfg.override = ov
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=path.parent)


def _parse_obstacle(d):
    if not isinstance(d, dict) or "type" not in d:
        raise SchemaError("obstacle.type", "is required")
    kind = d["type"]
    if kind == "all":
        _section(d, "obstacle", ("type",))
        return {"type": "all"}
    if kind == "ball":
        _section(d, "obstacle", ("type", "center", "radius"))
        if "radius" not in d:
            raise SchemaError("obstacle.radius", "is required")
        return {"type": "ball",
                "center": _vector("obstacle.center", d.get("center", [0.0, 0.0, 0.0]), 3),
                "radius": _number("obstacle.radius", d["radius"], 0.0, lo_open=True)}
    raise SchemaError("obstacle.type", "must be 'all' or 'ball'")


def _parse_H(d):
    if not isinstance(d, dict) or "type" not in d:
        raise SchemaError("H.type", "is required")
    kind = d["type"]
    if kind == "constant":
        _section(d, "H", ("type", "value", "sup_bound"))
        value = _number("H.value", d.get("value", 0.0))
        out = {"type": "constant", "value": value}
        peak = abs(value)
    elif kind == "radial":
        _section(d, "H", ("type", "radii", "values", "center", "sup_bound"))
        for k in ("radii", "values"):
            if k not in d:
                raise SchemaError(f"H.{k}", "is required")
            if not isinstance(d[k], list) or len(d[k]) < 2:
                raise SchemaError(f"H.{k}", "must be a list of at least 2 numbers")
        radii = [_number(f"H.radii[{i}]", r, 0.0) for i, r in enumerate(d["radii"])]
        values = [_number(f"H.values[{i}]", v) for i, v in enumerate(d["values"])]
        if len(radii) != len(values):
            raise SchemaError("H.values", "must have the same length as H.radii")
        if radii[0] != 0.0 or any(b <= a for a, b in zip(radii, radii[1:])):
            raise SchemaError("H.radii", "must start at 0 and increase strictly")
        out = {"type": "radial", "radii": radii, "values": values,
               "center": _vector("H.center", d.get("center", [0.0, 0.0, 0.0]), 3)}
        peak = max(abs(v) for v in values)
    else:
        raise SchemaError("H.type", "must be 'constant' or 'radial'")
    if "sup_bound" in d:
        bound = _number("H.sup_bound", d["sup_bound"], 0.0)
        if bound < peak:
            raise SchemaError("H.sup_bound", f"is below max |H| = {peak:g}")
        out["sup_bound"] = bound
    return out


# ------------------------------------------------------------ curve files

def load_curve(path):
    """Curve file: JSON object {"points": [[x, y, z], ...], "anchors": [i, j, k]}."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise SchemaError("curve_file", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError("curve_file", f"invalid JSON in {path} ({exc.msg})") from None
    if not isinstance(raw, dict) or "points" not in raw or "anchors" not in raw:
        raise SchemaError("curve_file", "needs 'points' and 'anchors'")
    return curve_from_samples(np.asarray(raw["points"], dtype=float), raw["anchors"])


def save_curve(path, curve) -> None:
    Path(path).write_text(json.dumps(curve.to_dict()))


# ------------------------------------------------------------ writers

def _obj_number(x: float) -> str:
    mant, exp = f"{x + 0.0:.12e}".split("e")
    return f"{mant}e{int(exp)}"


def write_frame(path, mesh, surface) -> None:
    """Wavefront OBJ: vertices in mesh order, 1-based triangle indices."""
    u = np.asarray(surface, dtype=float)
    if u.shape != (mesh.n_vertices, 3):
        raise ValueError(f"surface has shape {u.shape}, mesh needs ({mesh.n_vertices}, 3)")
    lines = ["v " + " ".join(_obj_number(c) for c in row) for row in u]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    _write_text(path, "\n".join(lines) + "\n")


def read_obj(path):
    """Vertex array and 0-based triangle array of an OBJ file."""
    verts, faces = [], []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(p) for p in parts[1:4]])
        elif parts[0] == "f":
            faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def write_trace(path, trace: FlowTrace) -> None:
    """CSV with the frozen column list; reals as %.12e, counters as integers."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for rec in trace.records:
                w.writerow([str(v) if isinstance(v, (int, np.integer)) else "%.12e" % v
                            for v in rec.row()])
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc


def read_trace(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in TRACE_COLUMNS}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_report(path, report: dict) -> None:
    """JSON report; non-finite numbers become the strings "inf", "-inf", "nan"."""
    _write_text(path, json.dumps(_jsonable(report), indent=2) + "\n")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())


def _write_text(path, text: str) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from exc
