"""Space-time convergence of Crank-Nicolson and BDF4 in 1D with tau = h.

Run: python3 demos/convergence_1d.py
"""

from nonlocal_fast import CgsConfig
from nonlocal_fast.study import StudySpec, records_to_csv, run_study

cgs = CgsConfig(tol=1e-11)
for problem, Ms in (("cn1d", [64, 128, 256, 512]), ("bdf4-1d", [16, 32, 64, 128])):
    recs = run_study(StudySpec(problem, [0.2, 0.5, 0.8], Ms, cgs=cgs))
    print(records_to_csv(recs))
    # CN is limited by tau^2; BDF4 shows the spatial order 4 - gamma
