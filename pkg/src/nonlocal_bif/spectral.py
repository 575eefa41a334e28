"""Principal eigenpairs of -dΔ + c(x) and the torsion-like function e_σ."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, integrate, laplacian


ROUNDOFF_FACTOR = 32


class EigenSolverError(RuntimeError):
    """Inverse iteration did not reach the requested tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"inverse iteration did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class EigenPair:
    value: float
    fn: np.ndarray
    iterations: int = 0
    residual: float = 0.0


def _normalize(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(integrate(mesh, x * x))


def principal_eigenpair(d: float, c, mesh: Mesh, tol: float = 1e-10, max_iter: int = 10000) -> EigenPair:
    """Smallest eigenvalue of ``d*L + diag(c)`` with its positive eigenfunction.

    ``c`` may be a scalar or a nodal field. The eigenfunction is normalized so
    that its integral of squares is one. Inverse iteration starts from the
    constant field, so the result is deterministic.
    """
    if not d > 0:
        raise ValueError(f"diffusion d must be positive, got {d}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    c = np.broadcast_to(np.asarray(c, dtype=float), (mesh.node_count,))
    if not np.all(np.isfinite(c)):
        raise ValueError("potential c must be finite")

    # shift makes the operator SPD; Rayleigh quotients below use the unshifted one
    shift = max(0.0, -float(c.min()))
    op = (d * laplacian(mesh) + sp.diags(c)).tocsc()
    lu = spla.splu((op + shift * sp.identity(mesh.node_count, format="csc")).tocsc())

    # round-off floor of ‖Ax - μx‖∞ for large ‖A‖ (fine meshes, big d or c)
    op_norm = float(abs(op).sum(axis=1).max())
    x = _normalize(mesh, np.ones(mesh.node_count))
    value = float(x @ (op @ x) / (x @ x))
    resid = np.inf
    for it in range(1, max_iter + 1):
        x = _normalize(mesh, lu.solve(x))
        ax = op @ x
        new = float(x @ ax / (x @ x))
        resid = float(np.max(np.abs(ax - new * x)))
        change = abs(new - value)
        value = new
        floor = ROUNDOFF_FACTOR * np.finfo(float).eps * op_norm * float(np.max(np.abs(x)))
        if change <= max(tol * abs(value), floor) and resid <= max(tol * (abs(value) + 1.0), floor):
            if x.sum() < 0:
                x = -x
            return EigenPair(value, x, it, resid)
    raise EigenSolverError(max_iter, resid)


@lru_cache(maxsize=32)
def _dirichlet_pair(mesh: Mesh) -> EigenPair:
    return principal_eigenpair(1.0, 0.0, mesh)


def dirichlet_eigenpair(mesh: Mesh) -> EigenPair:
    """λ₁ and φ₁ of the discrete Laplacian (cached per mesh)."""
    return _dirichlet_pair(mesh)


def solve_e_sigma(sigma: float, mesh: Mesh) -> np.ndarray:
    """Nodal solution of (L + σ) e = 1."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return _e_sigma(float(sigma), mesh).copy()


@lru_cache(maxsize=64)
def _e_sigma(sigma: float, mesh: Mesh) -> np.ndarray:
    op = (laplacian(mesh) + sigma * sp.identity(mesh.node_count)).tocsc()
    return spla.spsolve(op, np.ones(mesh.node_count))
