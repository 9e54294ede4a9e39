"""2D additive kernel: structured product vs dense, then a CN run.

Run: python3 demos/additive_2d.py
"""

import numpy as np

from nonlocal_fast import Grid2D, TimeStepConfig, build_additive, crank_nicolson_run, discretize, get_solution

gamma = 0.5
op = build_additive(Grid2D.square(0.0, 1.0, 6), gamma)
u = np.random.default_rng(0).standard_normal(op.size)
ref = op.to_dense() @ u
print("relative product difference:", np.linalg.norm(op.matvec(u) - ref) / np.linalg.norm(ref))
print("stored floats per unknown:", op.storage_floats() / op.size)

for M in (8, 16, 32):
    op = build_additive(Grid2D.square(0.0, 1.0, M), gamma)
    prob = discretize(get_solution("add2d-poly"), op)
    h = op.grid.gx.h
    rep = crank_nicolson_run(op, prob.source, prob.boundary, prob.exact(0.0), TimeStepConfig("cn", h, 1.0))
    err = np.abs(rep.solution - prob.exact(1.0)).max()
    print(f"M={M:3d} error={err:.4e} max CGS iterations={rep.max_iterations}")
