"""Dominance, conditioning and indefiniteness of the 1D collocation matrix.

Run: python3 demos/diagnostics.py
"""

from nonlocal_fast import CollocationGrid, assemble_operator
from nonlocal_fast.analysis import condition_growth, dominance_report, indefiniteness_scan

for gamma in (0.2, 0.5, 0.8):
    rep = dominance_report(assemble_operator(CollocationGrid(0.0, 1.0, 64), gamma))
    print(f"gamma={gamma}: min gap {rep.min_row_dominance_gap:.3e} (assumed {rep.min_gap_limit:.3e}), "
          f"Varah kappa bound {rep.cond_bound:.0f} vs {rep.cond_limit:.0f}, "
          f"symmetric part in [{rep.h_min_eig:.3e}, {rep.h_max_eig:.3e}]")
    kappas, slope = condition_growth(gamma=gamma)
    print(f"  kappa_inf for M=16..128: {kappas.round(1)}; log-log slope {slope:.2f}")

print("indefinite (gamma, M):", [(g, M) for g, M, lo, hi in indefiniteness_scan() if lo < 0 < hi])
