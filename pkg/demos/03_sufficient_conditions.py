"""
Checking the data before flowing
================================

Existence of the flow is guaranteed under a list of smallness conditions
on H relative to the obstacle and the initial energy. For a ball of
radius R and constant H they reduce to sup|H| < 3/(2R) and |H| <= 1/R.
"""

# %%
import math

import numpy as np

from hflow import Ball, Constant, Radial, check_conditions, circle_curve

curve = circle_curve(48, radius=0.5)
ball = Ball((0, 0, 0), 1.0)

# %%
for h in (0.9, 1.0, 1.4, 1.6):
    rep = check_conditions(Constant(h), ball, curve, dirichlet_u0=1.0, c=1 / 3)
    flags = {k: v["pass"] for k, v in rep.conditions.items()}
    print(f"H={h}: admissible={rep.admissible}  {flags}")

# %%
# A radially decaying H can be large near the centre as long as the
# level sets {|H| >= tau} stay small.
H = Radial(np.array([0.0, 0.2, 0.5, 1.0]), np.array([3.0, 1.0, 0.4, 0.3]))
rep = check_conditions(H, ball, curve, dirichlet_u0=math.pi, c=1 / 3)
for name, entry in rep.conditions.items():
    print(f"{name:9s} pass={entry['pass']!s:5s} value={entry.get('value')} "
          f"threshold={entry.get('threshold')}")
print("admissible:", rep.admissible)
