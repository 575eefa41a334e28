"""
Bifurcation diagrams

Two canonical shapes. With a(s) = 1 + s and no interaction term (b = 0) the
branch bends right and grows monotonically. With strong cooperation
(b = 10, rho = 2) the branch leaves to the left; a superlinear law
a(s) = 1 + s² eventually turns it around at a fold and sends it back to
large lambda. Every stored point passes the full verification suite.
"""

from nonlocal_bif import (ContinuationSettings, DiffusionLaw, ProblemParams, build_mesh, check_all,
                          continue_branch)

mesh = build_mesh(1, [1.0], [255])


def show(title, law, params, settings, every=4):
    br = continue_branch(law, params, settings, mesh)
    ok = all(check_all(p.state, params.with_lambda(p.lam), law, mesh).overall for p in br.points)
    print(f"\n{title}\n  lambda*={br.lambda_star:.4f}  points={len(br.points)}  "
          f"stop={br.reason}  folds={br.fold_count}  all verified={ok}")
    print("  step   lambda      sup_u      mass_v")
    for i, lam, arc, su, sv, mv, folds in br.rows():
        if i % every == 0 or i == len(br.points) - 1:
            print(f"  {i:4d}  {lam:9.4f}  {su:9.4f}  {mv:9.5f}")
    return br


show("supercritical: a(s) = 1 + s, b = 0",
     DiffusionLaw("affine", 1.0, 1.0), ProblemParams(0.0, 0.0, 1.0, 1.0),
     ContinuationSettings(ds_max=0.5, lambda_max=9.8696 + 5))

show("subcritical, no turning point: a = 1, b = 10, rho = 2",
     DiffusionLaw("constant", 1.0), ProblemParams(0.0, 10.0, 2.0, 1.0),
     ContinuationSettings(ds=0.05, ds_max=0.5, lambda_min=0.0), every=6)

show("subcritical with fold: a(s) = 1 + s², b = 10, rho = 2",
     DiffusionLaw("power", 1.0, 1.0, 2.0), ProblemParams(0.0, 10.0, 2.0, 1.0),
     ContinuationSettings(ds=0.05, ds_max=0.5, lambda_max=20.0), every=5)
