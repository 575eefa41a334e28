"""Newton's method for the discrete system.

The Jacobian is sparse except for the column produced by the nonlocal
coefficient a(∫v): differentiating a(∫v)·Lu in v gives a'(∫v)(Lu) ⊗ ∫(·).
Linear solves therefore use a sparse factorization plus a Sherman-Morrison
style elimination of that single rank-one term.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, integrate, laplacian
from .model import DiffusionLaw, ProblemParams, State, kernel_basis, residual
from .verify import classify

DENOMINATOR_FLOOR = 1e-12
MIN_STEP = 2.0**-20


class LinearSolveError(RuntimeError):
    pass


class SingularOperatorError(LinearSolveError):
    """The sparse part of the Jacobian could not be factorized."""


class VanishingDenominatorError(LinearSolveError):
    """1 + z·A⁻¹w vanished: the full Jacobian is (numerically) singular,
    typically at a fold of the solution branch."""


class NewtonError(RuntimeError):
    def __init__(self, message: str, iterations: int, residual: float):
        super().__init__(f"{message} (after {iterations} iterations, residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


@dataclass
class RankOneSystem:
    """Linear operator ``A + w zᵀ`` acting on stacked vectors (ξ, η)."""

    A: sp.csc_matrix
    w: np.ndarray
    z: np.ndarray
    _lu: Optional[object] = field(default=None, repr=False)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.w * (self.z @ x)

    def dense(self) -> np.ndarray:
        return self.A.toarray() + np.outer(self.w, self.z)

    def factor(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A)
            except RuntimeError as exc:
                raise SingularOperatorError(f"sparse Jacobian block is singular: {exc}") from exc
        return self._lu


def _sparse_block(params: ProblemParams, law: DiffusionLaw, state: State, mesh: Mesh):
    L = laplacian(mesh)
    n = mesh.node_count
    u, v = state.u, state.v
    mass = integrate(mesh, v)
    I = sp.identity(n, format="csr")
    a11 = law(mass) * L + sp.diags(2.0 * u - params.lam - params.b * v)
    a12 = sp.diags(-params.b * u)
    a21 = -params.rho * I
    a22 = L + params.sigma * I
    w_top = law.derivative(mass) * (L @ u)
    return sp.bmat([[a11, a12], [a21, a22]], format="csc"), w_top


def assemble_jacobian(params: ProblemParams, law: DiffusionLaw, state: State, mesh: Mesh) -> RankOneSystem:
    """Derivative of :func:`residual` in (u, v) at ``state``."""
    mesh.check_field(state.u)
    mesh.check_field(state.v)
    A, w_top = _sparse_block(params, law, state, mesh)
    n = mesh.node_count
    w = np.concatenate([w_top, np.zeros(n)])
    z = np.concatenate([np.zeros(n), mesh.weights])
    return RankOneSystem(A, w, z)


def solve_rank_one(system: RankOneSystem, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(A + w zᵀ) x = rhs`` with two sparse solves.

    With y = A⁻¹rhs and s = A⁻¹w, the solution is x = y - s (z·y)/(1 + z·s),
    so that z·x = (z·y)/(1 + z·s).
    """
    lu = system.factor()
    y = lu.solve(np.asarray(rhs, dtype=float))
    if not np.any(system.w):
        return y
    s = lu.solve(system.w)
    denom = 1.0 + system.z @ s
    if abs(denom) <= DENOMINATOR_FLOOR:
        raise VanishingDenominatorError(f"rank-one denominator {denom:.3e} vanished")
    return y - s * ((system.z @ y) / denom)


@dataclass(frozen=True)
class NewtonSettings:
    tol_residual: float = 1e-9
    tol_step: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.tol_step > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SolveOutcome:
    state: State
    iterations: int
    final_residual: float
    converged_to: str
    error: Optional[str] = None


def _norm(r) -> float:
    return float(max(np.max(np.abs(r[0])), np.max(np.abs(r[1]))))


def _small_step(dx: np.ndarray, x: np.ndarray, settings: NewtonSettings) -> bool:
    return float(np.max(np.abs(dx))) <= settings.tol_step * (1.0 + float(np.max(np.abs(x))))


def trivial_tol(params: ProblemParams) -> float:
    return 1e-8 * (1.0 + abs(params.lam))


def newton_solve(params: ProblemParams, law: DiffusionLaw, initial: State,
                 settings: NewtonSettings, mesh: Mesh) -> SolveOutcome:
    """Damped Newton iteration with backtracking on the residual max-norm."""
    x = initial.vector().astype(float)
    state = State.from_vector(x)
    r = residual(params, law, state, mesh)
    rnorm = _norm(r)
    for it in range(settings.max_iter + 1):
        if rnorm <= settings.tol_residual:
            return SolveOutcome(state, it, rnorm, classify(state, trivial_tol(params)))
        if it == settings.max_iter:
            break
        jac = assemble_jacobian(params, law, state, mesh)
        try:
            dx = solve_rank_one(jac, -np.concatenate(r))
        except LinearSolveError as exc:
            raise NewtonError(f"linear solve failed: {exc}", it, rnorm) from exc
        if _small_step(dx, x, settings):
            # residual is at its round-off floor; the full step is the answer
            state = State.from_vector(x + dx)
            rnorm = _norm(residual(params, law, state, mesh))
            return SolveOutcome(state, it + 1, rnorm, classify(state, trivial_tol(params)))
        t = settings.damping
        while True:
            trial = State.from_vector(x + t * dx)
            r_trial = residual(params, law, trial, mesh)
            n_trial = _norm(r_trial)
            if math.isfinite(n_trial) and n_trial < rnorm:
                break
            t *= 0.5
            if t < MIN_STEP:
                raise NewtonError("line search failed", it, rnorm)
        x = x + t * dx
        state, r, rnorm = trial, r_trial, n_trial
    raise NewtonError("maximum iterations exceeded", settings.max_iter, rnorm)


def _same(a: State, b: State) -> bool:
    scale = 1.0 + max(a.sup_norm(), b.sup_norm())
    gap = max(np.max(np.abs(a.u - b.u)), np.max(np.abs(a.v - b.v)))
    return gap <= 1e-6 * scale


@dataclass
class ProbeResult:
    starts: list          # one SolveOutcome per start, in start order
    distinct: list        # deduplicated converged outcomes

    @property
    def coexistence(self) -> list:
        return [o for o in self.distinct if o.converged_to == "coexistence"]


def multistart_probe(params: ProblemParams, law: DiffusionLaw, k: int, seed: int,
                     amplitude: tuple[float, float], settings: NewtonSettings, mesh: Mesh,
                     threads: int = 1) -> ProbeResult:
    """Run Newton from k random positive starts and collect distinct limits.

    Start j is u₀ = α φ₁ (1 + 0.3 ξ), v₀ = K u₀ with α log-uniform in
    ``amplitude`` and ξ uniform in [-1, 1]; each start draws from its own
    child of ``SeedSequence(seed)`` so results do not depend on scheduling.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    lo, hi = amplitude
    if not 0 < lo <= hi:
        raise ValueError("amplitude range must satisfy 0 < lo <= hi")
    phi, _, K = kernel_basis(params, mesh)
    children = np.random.SeedSequence(seed).spawn(k)

    def run(j: int) -> SolveOutcome:
        rng = np.random.default_rng(children[j])
        alpha = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        u0 = alpha * phi * (1.0 + 0.3 * rng.uniform(-1.0, 1.0, mesh.node_count))
        start = State(u0, K * u0)
        try:
            return newton_solve(params, law, start, settings, mesh)
        except (NewtonError, LinearSolveError, FloatingPointError) as exc:
            return SolveOutcome(start, getattr(exc, "iterations", 0),
                                getattr(exc, "residual", math.nan), "failed", str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(run, range(k)))
    else:
        outcomes = [run(j) for j in range(k)]

    distinct: list = []
    for out in outcomes:
        if out.converged_to == "failed":
            continue
        if not any(_same(out.state, d.state) for d in distinct):
            distinct.append(out)
    return ProbeResult(outcomes, distinct)
