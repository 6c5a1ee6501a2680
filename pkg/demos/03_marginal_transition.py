"""
From thermal to Poissonian marginals
====================================

Each removed photon pushes the single-arm count distribution away from the
thermal law and toward a Poissonian. The R-squared of both model fits and
the growing mean photon number track the handover.
"""
from photonsub import (
    DetectorModel,
    build_subtracted_state,
    detected_joint_pnd,
    joint_factorial_moment,
    witness_report,
)

Z = 0.66
DET = DetectorModel(0.1625, 0.0)

print(f"{'l':>3} {'mean':>8} {'R2 thermal':>12} {'R2 poisson':>12}  best")
for l in range(4):
    pnd = detected_joint_pnd(build_subtracted_state(Z, l), DET)
    rep = witness_report(pnd)
    r_t = rep.signal_thermal.r_squared
    r_p = rep.signal_poisson.r_squared
    mean = joint_factorial_moment(pnd, 1, 0)
    best = "thermal" if r_t > r_p else "poisson"
    print(f"{l:3d} {mean:8.4f} {r_t:12.6f} {r_p:12.6f}  {best}")

# the crossover needs no post-selection on the other arm: these are raw
# single-mode marginals of the joint detected distribution
