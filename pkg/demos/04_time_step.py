"""
Halving the time step
=====================

The scheme is first order in h: halving the step should roughly halve
the distance to the previous run, both along the flow and at the end.
"""

# %%
import numpy as np

from hflow import (AllSpace, Constant, FlowConfig, build_disk_mesh, bump, circle_curve,
                   harmonic_state, run_flow)
from hflow.admissibility import realize
from hflow.mesh import l2_norm

mesh = build_disk_mesh(48, 8)
curve = circle_curve(48)
start = bump(mesh, harmonic_state(mesh, curve), 0.5)

# %%
# Keep the surfaces at t = 0.2, 0.4, 0.8 for every step size.
times = (0.2, 0.4, 0.8)
runs = {}
for h in (0.1, 0.05, 0.025):
    snaps = {}

    def keep(rec, state, u, h=h, snaps=snaps):
        for t in times:
            if abs(rec.time - t) < 1e-9:
                snaps[t] = u.copy()

    res = run_flow(mesh, curve, AllSpace(), Constant(0.0), start, FlowConfig(h=h), on_step=keep)
    runs[h] = (res, snaps)
    print(f"h={h}: {res.trace.last.step} steps, D={res.trace.last.dirichlet:.6f}")

# %%
for t in times:
    d1 = l2_norm(mesh, runs[0.1][1][t] - runs[0.05][1][t])
    d2 = l2_norm(mesh, runs[0.05][1][t] - runs[0.025][1][t])
    print(f"t={t}: |u_0.1 - u_0.05|={d1:.3e}  |u_0.05 - u_0.025|={d2:.3e}  ratio {d2 / d1:.2f}")

# %%
end = {h: r[0].surface for h, r in runs.items()}
print("endpoint ratio:", l2_norm(mesh, end[0.025] - end[0.05]) / l2_norm(mesh, end[0.1] - end[0.05]))
