"""
Counting solutions with random restarts

For b <= 0 nothing positive survives below a_L lambda_1, and for b = 0 with
an increasing law there is at most one coexistence state. Neither claim can
be proven by sampling, but twenty Newton runs from scattered positive starts
give a quick empirical check.
"""

from collections import Counter

from nonlocal_bif import DiffusionLaw, NewtonSettings, ProblemParams, build_mesh, multistart_probe

mesh = build_mesh(1, [1.0], [255])
law = DiffusionLaw("affine", 1.0, 1.0)

for lam, b in ((15.0, 0.0), (9.0, -1.0), (12.0, -1.0)):
    params = ProblemParams(lam, b, 1.0, 1.0)
    res = multistart_probe(params, law, 20, seed=2024, amplitude=(0.1, 30.0),
                           settings=NewtonSettings(), mesh=mesh)
    tally = Counter(o.converged_to for o in res.starts)
    print(f"lambda={lam:5.1f} b={b:4.1f}: outcomes {dict(tally)}  "
          f"distinct coexistence states: {len(res.coexistence)}")
    for o in res.coexistence:
        print(f"    sup u = {o.state.u.max():.6f}   sup v = {o.state.v.max():.6f}")
