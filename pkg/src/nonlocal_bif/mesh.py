"""Finite-difference grids on an interval or an axis-aligned rectangle.

Only interior nodes carry unknowns; the homogeneous Dirichlet condition is
built into the stencil. In 2D the nodes are numbered in C order of the
``(n[0], n[1])`` grid, i.e. ``k = i0 * n[1] + i1`` with the last axis fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class Mesh:
    dim: int
    extents: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.n) != self.dim:
            raise ValueError("extents and n must have one entry per axis")
        for ax in range(self.dim):
            if not self.extents[ax] > 0:
                raise ValueError(f"extent on axis {ax} must be positive, got {self.extents[ax]}")
            if self.n[ax] < 3:
                raise ValueError(f"need at least 3 interior points on axis {ax}, got {self.n[ax]}")

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(L / (m + 1) for L, m in zip(self.extents, self.n))

    @property
    def node_count(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        """Quadrature weight shared by every interior node."""
        return float(np.prod(self.h))

    @property
    def measure(self) -> float:
        return float(np.prod(self.extents))

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.node_count, self.cell_volume)

    def axes(self) -> list[np.ndarray]:
        """Interior coordinates along each axis."""
        return [h * np.arange(1, m + 1) for h, m in zip(self.h, self.n)]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flattened nodal coordinates, one array per axis, in node order."""
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return tuple(g.ravel() for g in grids)

    def sample(self, fn) -> np.ndarray:
        """Evaluate ``fn(*coords)`` at the interior nodes."""
        return np.asarray(fn(*self.coordinates()), dtype=float).reshape(self.node_count)

    def check_field(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.node_count,):
            raise ValueError(f"field of shape {f.shape} does not live on a mesh with {self.node_count} nodes")
        return f


def build_mesh(dim: int, extents, n) -> Mesh:
    extents = tuple(float(e) for e in np.atleast_1d(extents))
    n = tuple(int(m) for m in np.atleast_1d(n))
    return Mesh(dim, extents, n)


def _second_difference(m: int, h: float) -> sp.csr_matrix:
    main = np.full(m, 2.0 / h**2)
    off = np.full(m - 1, -1.0 / h**2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


@lru_cache(maxsize=32)
def laplacian(mesh: Mesh) -> sp.csr_matrix:
    """Sparse matrix approximating -Δ with zero Dirichlet data.

    3-point stencil in 1D, 5-point in 2D; second order and SPD. The result is
    cached per mesh and must not be modified in place.
    """
    if mesh.dim == 1:
        return _second_difference(mesh.n[0], mesh.h[0])
    d0 = _second_difference(mesh.n[0], mesh.h[0])
    d1 = _second_difference(mesh.n[1], mesh.h[1])
    i0 = sp.identity(mesh.n[0], format="csr")
    i1 = sp.identity(mesh.n[1], format="csr")
    return (sp.kron(d0, i1) + sp.kron(i0, d1)).tocsr()


def integrate(mesh: Mesh, f) -> float:
    """Trapezoid rule with the field extended by zero onto the boundary."""
    f = mesh.check_field(f)
    return mesh.cell_volume * float(np.sum(f))
