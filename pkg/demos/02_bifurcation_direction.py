"""
Which way does the branch leave the trivial solution?

The coexistence branch starts at lambda* = a(0) lambda_1. Whether it first
moves right (supercritical) or left (subcritical) is decided by comparing
a'(0) with a threshold T that depends on b, rho and sigma only. Here we
scan a'(0) across T and compare the prediction with what continuation does.
"""

from nonlocal_bif import (ContinuationSettings, DiffusionLaw, ProblemParams, build_mesh,
                          classify_direction, continue_branch, direction_threshold, measure_direction)

mesh = build_mesh(1, [1.0], [255])
params = ProblemParams(0.0, b=10.0, rho=2.0, sigma=1.0)
T = direction_threshold(params, mesh)
print(f"b=10, rho=2, sigma=1: threshold T = {T:.5f}")

settings = ContinuationSettings(ds=0.02, max_steps=6)
print("\na'(0)    predicted       rho_1      measured")
for slope in (0.0, T - 0.2, T - 0.02, T + 0.02, T + 0.2, 1.0):
    law = DiffusionLaw("affine", 1.0, slope)
    d = classify_direction(law, params, mesh)
    br = continue_branch(law, params, settings, mesh)
    print(f"{slope:6.3f}   {d.label:14s} {d.rho1: .4f}    {measure_direction(br)}")

# with b=0 the threshold is negative, so any nondecreasing law is supercritical
T0 = direction_threshold(ProblemParams(0.0, 0.0, 1.0, 1.0), mesh)
print(f"\nb=0, rho=1, sigma=1: T = {T0:.5f}")
