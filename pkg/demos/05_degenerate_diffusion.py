"""
Degenerate diffusion a(0) = 0

With a(s) = s the trivial branch has nowhere to bifurcate from (lambda* = 0),
so we regularize: a_eps = a + eps, continue from eps lambda_1 up to the target
lambda, then shrink eps and re-solve from the previous state. The successive
differences shrink roughly tenfold per step, so the sequence settles.
"""

import numpy as np

from nonlocal_bif import ContinuationSettings, DiffusionLaw, ProblemParams, build_mesh, check_all, epsilon_homotopy

mesh = build_mesh(1, [1.0], [255])
law = DiffusionLaw("affine", 0.0, 1.0)
params = ProblemParams(5.0, b=-0.5, rho=1.0, sigma=1.0)

seq = epsilon_homotopy(law, params, [1e-1, 1e-2, 1e-3, 1e-4, 1e-5], ContinuationSettings(), mesh)
prev = None
print("eps        sup_u      sup_v      gap        verified")
for eps, st in seq:
    gap = "" if prev is None else f"{np.max(np.abs(st.u - prev.u)):.3e}"
    ok = check_all(st, params, law.shifted(eps), mesh).overall
    print(f"{eps:<9.0e}  {st.u.max():.6f}   {st.v.max():.6f}   {gap:9s}  {ok}")
    prev = st
# sup_u stays below lambda = 5, as it must for b <= 0
