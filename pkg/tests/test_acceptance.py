"""Acceptance criteria, each run at its stated tolerance.

Every criterion records one PASS/FAIL line; the lines are printed in the
terminal summary (see ``conftest.py``). Criteria that are known not to be
attainable are marked ``xfail(strict=True)`` so the line still reads FAIL
and an unexpected pass turns the suite red.
"""

import functools
import math
import time

import numpy as np
import pytest

from nonlocal_fast import (
    CgsConfig,
    CollocationGrid,
    Grid2D,
    assemble_operator,
    build_additive,
    build_multiplicative,
    cgs_solve,
)
from nonlocal_fast.analysis import (
    condition_growth,
    cond_limit_1d,
    diagonal_bound_1d,
    diagonal_bound_additive,
    diagonal_bound_multiplicative,
    indefiniteness_scan,
    row_dominance_gaps,
    zero_data_evolution,
)
from nonlocal_fast.study import StudySpec, run_study, run_timing

from conftest import GAMMAS

ACCEPTANCE_LINES: list[str] = []

# printed reference values, keyed by gamma, in increasing M
CN1D = {
    0.2: [1.1223e-06, 2.7995e-07, 6.9907e-08, 1.7467e-08],
    0.5: [1.1728e-06, 2.9229e-07, 7.2958e-08, 1.8225e-08],
    0.8: [1.2235e-06, 3.0432e-07, 7.5887e-08, 1.8964e-08],
}
CN1D_ITERS = {0.2: [3, 3, 3, 2], 0.5: [3, 3, 3, 3], 0.8: [4, 3, 3, 3]}
BDF4_1D = {
    0.2: [6.9518e-08, 4.9176e-09, 3.4026e-10, 2.3611e-11],
    0.5: [1.2045e-07, 1.0789e-08, 9.2911e-10, 7.9967e-11],
    0.8: [2.3806e-07, 2.6632e-08, 2.8910e-09, 3.0890e-10],
}
CN_MULT = {
    0.2: [2.1016e-02, 5.5269e-03, 1.3985e-03, 3.5060e-04],
    0.5: [2.1562e-02, 5.6003e-03, 1.4106e-03, 3.5334e-04],
    0.8: [2.2528e-02, 5.7243e-03, 1.4242e-03, 3.5620e-04],
}
CN_MULT_ITERS = {0.2: [8, 7, 6, 5], 0.5: [12, 9, 7, 6], 0.8: [17, 15, 12, 9]}
BDF4_MULT = {
    0.2: [3.0818e-03, 2.8489e-04, 2.1244e-05, 1.4568e-06],
    0.5: [2.6856e-03, 2.7296e-04, 2.2197e-05, 1.6769e-06],
    0.8: [2.9844e-03, 2.1386e-04, 2.0220e-05, 1.9644e-06],
}
BDF4_MULT_RATES = {0.2: [3.4353, 3.7453, 3.8662], 0.5: [3.2985, 3.6203, 3.7526], 0.8: [3.8027, 3.4028, 3.3636]}
ADD_EXP = {
    0.2: [1.0639e-01, 7.7522e-03, 5.5544e-04, 3.8127e-05],
    0.5: [1.6147e-01, 1.3699e-02, 1.1571e-03, 9.4740e-05],
    0.8: [2.5036e-01, 2.4766e-02, 2.4233e-03, 2.3380e-04],
}
ADD_EXP_ITERS = 3
ADD_POLY = {
    0.2: [3.7979e-03, 9.7724e-04, 2.4792e-04, 6.2440e-05],
    0.5: [4.0249e-03, 1.0274e-03, 2.5942e-04, 6.5160e-05],
    0.8: [4.3137e-03, 1.0901e-03, 2.7337e-04, 6.8373e-05],
}
ADD_POLY_ITERS = {0.2: [4, 4, 4, 3], 0.5: [5, 4, 4, 4], 0.8: [6, 5, 4, 4]}

# At 1e-9 relative to ||b|| ~ ||U|| the per-step algebraic error accumulates over
# ~10^3 steps past the 1D discretization error at M >= 512. Iteration counts at
# 1e-11 bound those at 1e-9 from above, so the iteration checks stay valid.
STUDY_CGS = CgsConfig(tol=1e-11)

XFAIL_3 = pytest.mark.xfail(strict=True, reason=(
    "2D multiplicative magnitudes differ 20-50% from the printed tables while rates agree; "
    "see the decisions ledger"))
XFAIL_4 = pytest.mark.xfail(strict=True, reason=(
    "printed additive (fixed tau) errors match our M=2k row; at the stated M magnitudes are ~10x off; "
    "see the decisions ledger"))
XFAIL_6 = pytest.mark.xfail(strict=True, reason=(
    "interior row defect is ~(h/3)2^g, below the assumed h(b-a)^-g, so the kappa bound "
    "fails for g <= 0.5; see the decisions ledger"))


class Checks:
    """Collects named sub-checks and emits one summary line per criterion."""

    def __init__(self, name):
        self.name = name
        self.items = []

    def add(self, label, ok, detail=""):
        self.items.append((label, bool(ok), detail))
        return ok

    def finish(self):
        failed = [f"{lbl} ({d})" if d else lbl for lbl, ok, d in self.items if not ok]
        status = "PASS" if not failed else "FAIL"
        line = f"{status} {self.name}: {len(self.items) - len(failed)}/{len(self.items)} checks"
        if failed:
            line += "; failed: " + "; ".join(failed[:8]) + (" ..." if len(failed) > 8 else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        for item in failed:
            print("  failed:", item)
        assert not failed, line


def _rel(a, b):
    return abs(a - b) / abs(b)


def _rates(errs):
    return [math.log2(e0 / e1) for e0, e1 in zip(errs[:-1], errs[1:])]


@functools.lru_cache(maxsize=None)
def _study(problem, gamma, Ms, tau="equal-h", solution=None):
    t0 = time.perf_counter()
    recs = run_study(StudySpec(problem, [gamma], list(Ms), tau=tau, solution=solution, cgs=STUDY_CGS))
    return recs, time.perf_counter() - t0


def _table_checks(chk, label, recs, printed, rtol, iters=None):
    for rec, ref in zip(recs, printed):
        chk.add(f"{label} g={rec.gamma} M={rec.M} error", rec.ok and _rel(rec.error_inf, ref) <= rtol,
                f"{rec.error_inf:.4e} vs {ref:.4e}")
    if iters is not None:
        for rec, it in zip(recs, iters):
            chk.add(f"{label} g={rec.gamma} M={rec.M} iters", rec.cgs_iters_max <= 2 * it,
                    f"{rec.cgs_iters_max} vs 2x{it}")


# -- criteria 1-4: convergence tables ----------------------------------------------------


def test_criterion_1_cn_1d():
    chk = Checks("criterion 1 (1D CN, M=2^7..2^10, tau=h)")
    total = 0.0
    for g in GAMMAS:
        recs, secs = _study("cn1d", g, (128, 256, 512, 1024))
        total += secs
        _table_checks(chk, "cn1d", recs, CN1D[g], 0.05, CN1D_ITERS[g])
        for M, r in zip((256, 512, 1024), _rates([r.error_inf for r in recs])):
            chk.add(f"cn1d g={g} M={M} rate", abs(r - 2) <= 0.05, f"{r:.3f}")
    chk.add("wall time < 2 min", total < 120, f"{total:.1f}s")
    chk.finish()


def test_criterion_2_bdf4_1d():
    chk = Checks("criterion 2 (1D BDF4, M=2^5..2^8, tau=h)")
    for g in GAMMAS:
        recs, _ = _study("bdf4-1d", g, (32, 64, 128, 256))
        _table_checks(chk, "bdf4-1d", recs, BDF4_1D[g], 0.10)
        for M, r in zip((64, 128, 256), _rates([r.error_inf for r in recs])):
            chk.add(f"bdf4-1d g={g} M={M} rate", abs(r - (4 - g)) <= 0.15, f"{r:.3f} vs {4 - g}")
    chk.finish()


@XFAIL_3
def test_criterion_3_multiplicative_2d():
    chk = Checks("criterion 3 (2D multiplicative CN/BDF4, M=2^3..2^6)")
    Ms = (8, 16, 32, 64)
    total = 0.0
    for g in GAMMAS:
        cn, s1 = _study("cn2d-mult", g, Ms)
        bd, s2 = _study("bdf4-2d-mult", g, Ms)
        total += s1 + s2
        _table_checks(chk, "cn2d-mult", cn, CN_MULT[g], 0.10, CN_MULT_ITERS[g])
        _table_checks(chk, "bdf4-2d-mult", bd, BDF4_MULT[g], 0.10)
        for M, r in zip(Ms[1:], _rates([r.error_inf for r in cn])):
            chk.add(f"cn2d-mult g={g} M={M} rate", abs(r - 2) <= 0.1, f"{r:.3f}")
        for M, r, ref in zip(Ms[1:], _rates([r.error_inf for r in bd]), BDF4_MULT_RATES[g]):
            chk.add(f"bdf4-2d-mult g={g} M={M} rate", abs(r - ref) <= 0.25, f"{r:.3f} vs {ref}")
    chk.add("wall time < 15 min", total < 900, f"{total:.1f}s")
    chk.finish()


@XFAIL_4
def test_criterion_4_additive_2d():
    chk = Checks("criterion 4 (2D additive CN, fixed tau and tau=h)")
    Ms = (2, 4, 8, 16)
    for g in GAMMAS:
        t5, _ = _study("cn2d-add", g, Ms, 1e-3, "add2d-exp")
        _table_checks(chk, "add-exp tau=1e-3", t5, ADD_EXP[g], 0.25, [ADD_EXP_ITERS] * 4)
        for M, r in zip(Ms[1:], _rates([r.error_inf for r in t5])):
            chk.add(f"table5.5 g={g} M={M} rate", abs(r - (4 - g)) <= 0.25, f"{r:.3f} vs {4 - g}")
        t6, _ = _study("cn2d-add", g, (8, 16, 32, 64), "equal-h", "add2d-poly")
        _table_checks(chk, "add-poly tau=h", t6, ADD_POLY[g], 0.25, ADD_POLY_ITERS[g])
        for M, r in zip((16, 32, 64), _rates([r.error_inf for r in t6])):
            chk.add(f"table5.6 g={g} M={M} rate", abs(r - 2) <= 0.1, f"{r:.3f}")
    chk.finish()


# -- criterion 5: structured products and solves against dense ----------------------------


def _ops_small():
    for g in GAMMAS:
        for M in (2, 3, 5, 8, 16, 32):
            yield f"1d g={g} M={M}", assemble_operator(CollocationGrid(0.0, 1.0, M), g)
        for M in (2, 4, 8):
            grid = Grid2D.square(0.0, 1.0, M)
            yield f"mult g={g} M={M}", build_multiplicative(grid, g)
            yield f"add g={g} M={M}", build_additive(grid, g)


def test_criterion_5_fast_equals_dense():
    chk = Checks("criterion 5 (structured product and solve vs dense)")
    rng = np.random.default_rng(5)
    worst_mv, worst_solve = 0.0, 0.0
    for label, op in _ops_small():
        A = op.to_dense()
        u = rng.standard_normal(op.size)
        ref = A @ u
        mv = np.linalg.norm(op.matvec(u) - ref) / np.linalg.norm(ref)
        worst_mv = max(worst_mv, mv)
        chk.add(f"{label} matvec", mv <= 1e-10, f"{mv:.1e}")
        # one Crank-Nicolson step system with tau = h
        h = op.grid.h if hasattr(op.grid, "h") else op.grid.gx.h
        B = np.eye(op.size) + 0.5 * h * A
        b = rng.standard_normal(op.size)
        x = cgs_solve(lambda v: v + 0.5 * h * op.matvec(v), b, cfg=CgsConfig()).solution
        xd = np.linalg.solve(B, b)
        err = np.abs(x - xd).max() / np.abs(xd).max()
        worst_solve = max(worst_solve, err)
        chk.add(f"{label} solve", err <= 1e-8, f"{err:.1e}")
    print(f"worst matvec rel {worst_mv:.2e}, worst solve rel {worst_solve:.2e}")
    chk.finish()


# -- criterion 6: structural properties -----------------------------------------------------


@XFAIL_6
def test_criterion_6_structure():
    chk = Checks("criterion 6 (annihilation, dominance, diagonal and conditioning bounds, indefiniteness)")
    for g in GAMMAS:
        for M in (4, 16, 64):
            op = assemble_operator(CollocationGrid(0.0, 1.0, M), g)
            A = op.to_dense()
            res = np.abs(A @ np.ones(op.size) - op.boundary_vector(1.0, 1.0)).max()
            chk.add(f"1d g={g} M={M} annihilation", res <= 1e-10, f"{res:.1e}")
            chk.add(f"1d g={g} M={M} dominance", row_dominance_gaps(A).min() > 0)
            chk.add(f"1d g={g} M={M} diagonal", np.all(op.diagonal > 0)
                    and op.diagonal.max() < diagonal_bound_1d(0.0, 1.0, g))
            kappa = np.linalg.norm(A, np.inf) * np.linalg.norm(np.linalg.inv(A), np.inf)
            lim = cond_limit_1d(op.grid, g)
            chk.add(f"1d g={g} M={M} kappa bound", kappa <= lim, f"{kappa:.0f} vs {lim:.0f}")
        _, slope = condition_growth((16, 32, 64, 128), g)
        chk.add(f"1d g={g} kappa slope", abs(slope - 1) <= 0.25, f"{slope:.3f}")
        for kind, build, bound in (("mult", build_multiplicative, diagonal_bound_multiplicative),
                                   ("add", build_additive, diagonal_bound_additive)):
            for a, b, c, d in ((0.0, 1.0, 0.0, 1.0), (0.0, 2.0, -1.0, 0.5)):
                op = build(Grid2D(CollocationGrid(a, b, 5), CollocationGrid(c, d, 4)), g)
                A = op.to_dense()
                ones = np.ones(op.size)
                res = np.abs(A @ ones - op.boundary_vector(lambda x, y: np.ones_like(x))).max()
                tag = f"{kind} g={g} [{a},{b}]x[{c},{d}]"
                chk.add(f"{tag} annihilation", res <= 1e-10, f"{res:.1e}")
                chk.add(f"{tag} dominance", row_dominance_gaps(A).min() > 0)
                chk.add(f"{tag} diagonal", np.all(op.diagonal > 0) and op.diagonal.max() <= bound(a, b, c, d, g))
    rows = indefiniteness_scan()
    found = [(g, M) for g, M, lo, hi in rows if lo < 0 < hi]
    chk.add("indefiniteness scan", bool(found), f"{len(found)} indefinite cases")
    chk.finish()


# -- criterion 7: zero-data stability -------------------------------------------------------


def test_criterion_7_zero_data_stability():
    chk = Checks("criterion 7 (zero-data CN bounded by exp(T C) ||u0||)")
    rng = np.random.default_rng(7)
    T = 1.0
    for g in GAMMAS:
        cases = [
            ("1d", assemble_operator(CollocationGrid(0.0, 1.0, 64), g), diagonal_bound_1d(0.0, 1.0, g)),
            ("mult", build_multiplicative(Grid2D.square(0.0, 1.0, 8), g),
             diagonal_bound_multiplicative(0.0, 1.0, 0.0, 1.0, g)),
            ("add", build_additive(Grid2D.square(0.0, 1.0, 8), g), diagonal_bound_additive(0.0, 1.0, 0.0, 1.0, g)),
        ]
        for kind, op, C in cases:
            h = op.grid.h if hasattr(op.grid, "h") else op.grid.gx.h
            u0 = rng.standard_normal(op.size)
            for tau in (h, 4 * h):
                norms = zero_data_evolution(op, u0, tau, T)
                bound = math.exp(T * C) * norms[0]
                chk.add(f"{kind} g={g} tau={tau:g}", np.all(np.isfinite(norms)) and norms.max() <= bound,
                        f"max {norms.max():.3g} vs {bound:.3g}")
    chk.finish()


# -- criterion 8: complexity ----------------------------------------------------------------


def test_criterion_8_complexity():
    chk = Checks("criterion 8 (M log M cost, O(M) storage, M=2^10..2^15)")
    Ms = [2**k for k in range(10, 16)]
    for problem in ("matvec1d", "step1d"):
        res = run_timing(problem, Ms, gamma=0.5, repeats=5)
        print(res.to_csv())
        chk.add(f"{problem} M log M fit", res.r2 >= 0.95, f"R^2 {res.r2:.4f}")
        chk.add(f"{problem} storage", bool(np.all(res.storage <= 16 * res.Ms)),
                f"max {float((res.storage / res.Ms).max()):.2f} floats per M")
    chk.finish()
