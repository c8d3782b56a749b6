"""Command line: hflow check|flow|stationary|diagnose.

Exit codes: 0 success (or admissible), 1 data not admissible,
2 runtime error, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from contextlib import nullcontext

import numpy as np

from . import energy as E
from .admissibility import (bump, check_conditions, harmonic_state, is_monotone, realize,
                            state_from_surface)
from .errors import CurveError, HFlowError, MeshError, NotAdmissible, SchemaError
from .flow import (default_field_family, euler_lagrange_residual, neumann_residual, run_flow,
                   solve_stationary, stationarity_residual)
from .io import load_config, read_obj, write_frame, write_report, write_trace

EXIT_OK, EXIT_INADMISSIBLE, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2, 3


def _thread_limit():
    raw = os.environ.get("HFLOW_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise SchemaError("HFLOW_THREADS", "must be a positive integer") from None
    if n < 1:
        raise SchemaError("HFLOW_THREADS", "must be a positive integer")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def _setup(cfg):
    try:
        mesh = cfg.build_mesh()
        curve = cfg.build_curve()
        A = cfg.build_obstacle()
        H = cfg.build_H()
    except (MeshError, CurveError, ValueError) as exc:
        raise SchemaError("setup", str(exc)) from exc
    ini = cfg.initial
    state = harmonic_state(mesh, curve, A)
    if ini.bump_height:
        state = bump(mesh, state, ini.bump_height, ini.bump_center, ini.bump_radius)
        state.interior = A.project(state.interior)
    return mesh, curve, A, H, state


def _out_dir(cfg):
    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_check(cfg, args) -> int:
    mesh, curve, A, H, state = _setup(cfg)
    u0 = realize(mesh, curve, A, state)
    report = check_conditions(H, A, curve, E.dirichlet(mesh, u0), cfg.c, cfg.s)
    doc = {"conditions": report.to_dict(), "admissible": report.admissible}
    path = _out_dir(cfg) / "report.json"
    write_report(path, doc)
    print(path.read_text(), end="")
    return EXIT_OK if report.admissible else EXIT_INADMISSIBLE


def cmd_flow(cfg, args) -> int:
    mesh, curve, A, H, state = _setup(cfg)
    out = _out_dir(cfg)
    cadence = cfg.cadence

    def on_step(rec, st, u):
        if cadence and rec.step % cadence == 0:
            write_frame(out / f"frame_{rec.step:06d}.obj", mesh, u)
        if not args.quiet and rec.step:
            print(f"step {rec.step:6d}  D={rec.dirichlet:.8f}  dt={rec.dt_norm:.3e}  "
                  f"hopf={rec.hopf_residual:.3e}", file=sys.stderr)

    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # breaches land in the report
        result = run_flow(mesh, curve, A, H, state, cfg.flow,
                          override=cfg.override or args.override, on_step=on_step)
    elapsed = time.perf_counter() - t0
    write_trace(out / "trace.csv", result.trace)
    write_frame(out / "final.obj", mesh, result.surface)
    last = result.trace.last
    doc = {
        "conditions": result.report.to_dict(),
        "verdict": {"converged": result.converged, "stop_reason": result.stop_reason,
                    "steps": last.step, "time": last.time, "seconds": elapsed},
        "final": {**vars(last), "euler_lagrange_residual":
                  euler_lagrange_residual(mesh, result.surface, result.f, H)},
        "warnings": result.trace.warnings,
        "config": cfg.to_dict(),
    }
    write_report(out / "report.json", doc)
    print(f"{'converged' if result.converged else 'stopped'} after {last.step} steps: "
          f"D = {last.dirichlet:.10f}, hopf = {last.hopf_residual:.3e}; output in {out}")
    return EXIT_OK


def cmd_stationary(cfg, args) -> int:
    mesh, curve, A, H, state = _setup(cfg)
    u0 = realize(mesh, curve, A, state)
    report = check_conditions(H, A, curve, E.dirichlet(mesh, u0), cfg.c, cfg.s)
    if not report.admissible and not (cfg.override or args.override):
        raise NotAdmissible("data fail the sufficient conditions")
    out = _out_dir(cfg)
    final, info = solve_stationary(mesh, curve, A, H, state, cfg.flow, return_info=True)
    u = realize(mesh, curve, A, final)
    write_frame(out / "stationary.obj", mesh, u)
    doc = {
        "conditions": report.to_dict(),
        "verdict": {"converged": info.converged, "iterations": info.iters,
                    "grad_norm": info.grad_norm, "stalled": info.stalled},
        "final": _residuals(mesh, curve, A, H, final, u, u0, cfg),
        "config": cfg.to_dict(),
    }
    write_report(out / "report.json", doc)
    print(f"stationary solve: {info.iters} iterations, gradient norm {info.grad_norm:.3e}, "
          f"D = {doc['final']['dirichlet']:.10f}; output in {out}")
    return EXIT_OK


def _residuals(mesh, curve, A, H, state, u, u0, cfg):
    zero = np.zeros_like(u)
    return {
        "dirichlet": E.dirichlet(mesh, u),
        "h_volume": E.h_volume(mesh, u, u0, H, cfg.flow.q_s, cfg.flow.q_x),
        "hopf_residual": E.hopf_residual(mesh, u),
        "neumann_residual": neumann_residual(mesh, curve, A, H, state, zero, cfg.flow.n_test),
        "stationarity_residual": stationarity_residual(mesh, u, zero,
                                                       default_field_family(mesh)),
        "euler_lagrange_residual": euler_lagrange_residual(mesh, u, zero, H),
        "monotone": is_monotone(mesh, curve, state.phases, tol=1e-12),
    }


def cmd_diagnose(cfg, args) -> int:
    mesh, curve, A, H, state0 = _setup(cfg)
    verts, faces = read_obj(args.surface)
    if verts.shape != (mesh.n_vertices, 3):
        raise HFlowError(f"{args.surface}: {len(verts)} vertices, mesh has {mesh.n_vertices}")
    state = state_from_surface(mesh, curve, verts)
    u0 = realize(mesh, curve, A, state0)
    doc = _residuals(mesh, curve, A, H, state, verts, u0, cfg)
    doc["boundary_gap"] = float(np.max(np.linalg.norm(
        verts[mesh.boundary_loop] - curve.eval(state.phases), axis=1)))
    doc["inside_obstacle"] = bool(np.all(A.contains(verts, 1e-9)))
    print(json.dumps(doc, indent=2, default=float))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hflow", description="Flow of H-surfaces with a "
                                "Plateau boundary condition on a triangulated disk.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [
        ("check", cmd_check, "report the sufficient conditions for the configured data"),
        ("flow", cmd_flow, "run the time-discrete flow"),
        ("stationary", cmd_stationary, "minimize D + 2 V_H directly"),
        ("diagnose", cmd_diagnose, "residuals of a surface given as OBJ"),
    ]:
        sp_ = sub.add_parser(name, help=helptext)
        sp_.add_argument("config")
        if name == "diagnose":
            sp_.add_argument("surface")
        if name in ("flow", "stationary"):
            sp_.add_argument("--override", action="store_true",
                             help="run even if the sufficient conditions fail")
        if name == "flow":
            sp_.add_argument("--quiet", action="store_true")
        sp_.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _thread_limit():
            cfg = load_config(args.config)
            return args.func(cfg, args)
    except SchemaError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotAdmissible as exc:
        print(f"not admissible: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except (HFlowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
