"""
Principal eigenpair of the Dirichlet Laplacian and the function e_sigma

Everything downstream is built on two linear objects: the first eigenpair
(lambda_1, phi_1) of -Laplacian on the unit interval, and e_sigma solving
(-Laplacian + sigma) e = 1. Both have closed forms in 1D, which makes them a
good first look at how accurate the grid is.
"""

import numpy as np

from nonlocal_bif import build_mesh, dirichlet_eigenpair, integrate, principal_eigenpair, solve_e_sigma

print("n     lambda_1          error         ratio")
prev = None
for n in (31, 63, 127, 255, 511):
    mesh = build_mesh(1, [1.0], [n])
    err = dirichlet_eigenpair(mesh).value - np.pi**2
    ratio = "" if prev is None else f"{prev / err:.3f}"
    print(f"{n:<5d} {np.pi**2 + err:.10f}  {err: .3e}   {ratio}")
    prev = err
# halving h divides the error by four: second order

mesh = build_mesh(1, [1.0], [255])
phi = dirichlet_eigenpair(mesh).fn
print("\n∫phi² =", integrate(mesh, phi**2), " min phi =", phi.min())

# e_sigma against cosh formula, and its decay in sigma
for sigma in (1.0, 4.0, 16.0, 100.0):
    e = solve_e_sigma(sigma, mesh)
    r = np.sqrt(sigma)
    exact = mesh.sample(lambda x: (1 - np.cosh(r * (x - 0.5)) / np.cosh(r / 2)) / sigma)
    print(f"sigma={sigma:6.1f}  max e={e.max():.6f}  err={np.max(np.abs(e - exact)):.2e}")

# a potential shifts the spectrum; a non-constant one is handled too
c = mesh.sample(lambda x: 30 * x)
print("\nsigma_1[-Lap + 30x] =", principal_eigenpair(1.0, c, mesh).value)

# the 2D square works the same way: lambda_1 -> 2 pi²
sq = build_mesh(2, [1.0, 1.0], [63, 63])
print("unit square lambda_1 =", dirichlet_eigenpair(sq).value, " (2 pi² =", 2 * np.pi**2, ")")
