"""Pseudo-arclength continuation of the coexistence branch emanating from
(λ*, 0, 0), plus the ε-homotopy used when a(0) = 0.

Unknowns are stacked as X = (u, v, λ). Distances use the metric

    ‖X‖² = (‖u‖² + ‖v‖²) / N + λ²,

with N the node count, so refining the mesh does not rescale arclength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, integrate
from .model import (DiffusionLaw, ProblemParams, State, bifurcation_point,
                    classify_direction, h1_margin, kernel_basis, residual)
from .nonlinear import NewtonError, NewtonSettings, _sparse_block, newton_solve, trivial_tol
from .verify import classify

STEP_BOUND_FACTOR = 1.5
FAST_CONVERGENCE = 3
GROWTH = 1.3


class ContinuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    state: State
    sup_u: float
    sup_v: float
    mass_v: float
    arc: float
    folds: int = 0


@dataclass
class Branch:
    lambda_star: float
    points: list = field(default_factory=list)
    reason: str = ""
    fold_count: int = 0

    def lambdas(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    def rows(self):
        """CSV rows: step, lambda, arc, sup_u, sup_v, mass_v, fold_count."""
        for i, p in enumerate(self.points):
            yield i, p.lam, p.arc, p.sup_u, p.sup_v, p.mass_v, p.folds


@dataclass(frozen=True)
class ContinuationSettings:
    ds: float = 0.1
    ds_min: float = 1e-6
    ds_max: float = 1.0
    max_steps: int = 400
    lambda_max: float = math.inf
    lambda_min: float = -math.inf
    norm_max: float = 1e3
    max_folds: int = 8
    corrector_max_iter: int = 15
    newton: NewtonSettings = NewtonSettings()

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds <= self.ds_max:
            raise ValueError("need 0 < ds_min <= ds <= ds_max")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


def _inner(mesh: Mesh, x: np.ndarray, y: np.ndarray) -> float:
    n2 = 2 * mesh.node_count
    return float(x[:n2] @ y[:n2]) / mesh.node_count + float(x[n2] * y[n2])


def _norm(mesh: Mesh, x: np.ndarray) -> float:
    return math.sqrt(_inner(mesh, x, x))


def _split(mesh: Mesh, X: np.ndarray) -> tuple[State, float]:
    n = mesh.node_count
    return State(X[:n].copy(), X[n:2 * n].copy()), float(X[2 * n])


def initial_tangent(law: DiffusionLaw, params: ProblemParams, mesh: Mesh) -> tuple[float, State]:
    """Unit tangent (dλ, (φ₁, ψ₁)) of the branch at (λ*, 0, 0)."""
    if law(0.0) <= 0:
        raise ValueError("a(0) must be positive; use epsilon_homotopy for a(0) = 0")
    phi, psi, _ = kernel_basis(params, mesh)
    rho1 = classify_direction(law, params, mesh).rho1
    X = np.concatenate([phi, psi, [rho1]])
    X /= _norm(mesh, X)
    state, dlam = _split(mesh, X)
    return dlam, state


def _correct(law, params, mesh, X_pred, X_base, tau, ds, settings):
    """Newton on the system augmented by the arclength condition.

    The nonlocal column a'(∫v)Lu is carried by an extra unknown μ = ∫δv, so
    the bordered matrix stays sparse and remains regular through folds.
    """
    n = mesh.node_count
    n2 = 2 * n
    tol = settings.newton.tol_residual
    tau_row = np.concatenate([tau[:n2] / n, [tau[n2]]])
    mass_row = sp.csr_matrix(np.concatenate([np.zeros(n), mesh.weights, [0.0, -1.0]])[None, :])
    X = X_pred.copy()
    first = None
    for it in range(settings.corrector_max_iter + 1):
        state, lam = _split(mesh, X)
        p = params.with_lambda(lam)
        r1, r2 = residual(p, law, state, mesh)
        g = _inner(mesh, tau, X - X_base) - ds
        rnorm = max(float(np.max(np.abs(r1))), float(np.max(np.abs(r2))), abs(g))
        if not math.isfinite(rnorm):
            return None, it
        if first is None:
            first = rnorm
        elif rnorm > 1e6 * max(first, 1.0):
            return None, it
        if rnorm <= tol:
            return X, it
        if it == settings.corrector_max_iter:
            break
        A, w_top = _sparse_block(p, law, state, mesh)
        col_lam = sp.csr_matrix(np.concatenate([-state.u, np.zeros(n)])[:, None])
        col_mu = sp.csr_matrix(np.concatenate([w_top, np.zeros(n)])[:, None])
        M = sp.bmat([
            [A, col_lam, col_mu],
            [sp.csr_matrix(tau_row[None, :n2]), sp.csr_matrix([[tau_row[n2]]]), None],
            [mass_row[:, :n2], None, sp.csr_matrix([[-1.0]])],
        ], format="csc")
        rhs = -np.concatenate([r1, r2, [g, 0.0]])
        try:
            d = spla.splu(M).solve(rhs)
        except RuntimeError:
            return None, it
        step = d[:n2 + 1]
        X = X + step
        if np.max(np.abs(step)) <= settings.newton.tol_step * (1.0 + np.max(np.abs(X))):
            return X, it + 1
    return None, settings.corrector_max_iter


def _point(mesh: Mesh, X: np.ndarray, arc: float, folds: int) -> BranchPoint:
    state, lam = _split(mesh, X)
    return BranchPoint(lam, state, float(np.max(state.u)), float(np.max(state.v)),
                       integrate(mesh, state.v), arc, folds)


def continue_branch(law: DiffusionLaw, params: ProblemParams, settings: ContinuationSettings,
                    mesh: Mesh) -> Branch:
    """Trace the coexistence branch from (λ*, 0, 0); ``params.lam`` is ignored.

    The first point is corrected at amplitude s₀ = 1e-3·(1 + λ*) along the
    bifurcation tangent, later predictions use the secant. Steps shrink by
    half on corrector failure and grow by 1.3 after fast convergence.
    """
    if not params.rho > 0:
        raise ValueError("rho must be positive")
    lam_star = bifurcation_point(law, mesh)
    dlam, dstate = initial_tangent(law, params, mesh)
    n = mesh.node_count
    tangent = np.concatenate([dstate.u, dstate.v, [dlam]])
    origin = np.concatenate([np.zeros(2 * n), [lam_star]])
    s0 = 1e-3 * (1.0 + lam_star)

    branch = Branch(lam_star)
    X, _ = _correct(law, params, mesh, origin + s0 * tangent, origin, tangent, s0, settings)
    if X is None or classify(_split(mesh, X)[0], trivial_tol(params)) != "coexistence":
        raise ContinuationError("corrector failed at the first step off the bifurcation point")
    arc = _norm(mesh, X - origin)
    branch.points.append(_point(mesh, X, arc, 0))

    prev = origin
    ds = settings.ds
    last_dir = 0.0
    steps = 0
    while True:
        reason = _termination(branch, settings)
        if reason:
            branch.reason = reason
            return branch
        if steps >= settings.max_steps:
            branch.reason = "max_steps"
            return branch
        tau = X - prev
        tau /= _norm(mesh, tau)
        X_new, iters = _correct(law, params, mesh, X + ds * tau, X, tau, ds, settings)
        ok = X_new is not None
        if ok:
            state, lam = _split(mesh, X_new)
            dist = _norm(mesh, X_new - X)
            ok = (classify(state, trivial_tol(params)) == "coexistence"
                  and dist <= STEP_BOUND_FACTOR * ds)
        if not ok:
            ds *= 0.5
            if ds < settings.ds_min:
                branch.reason = "step_failure"
                return branch
            continue
        steps += 1
        dl = lam - branch.points[-1].lam
        if last_dir and dl and math.copysign(1.0, dl) != last_dir:
            branch.fold_count += 1
        if dl:
            last_dir = math.copysign(1.0, dl)
        arc += dist
        branch.points.append(_point(mesh, X_new, arc, branch.fold_count))
        prev, X = X, X_new
        if iters <= FAST_CONVERGENCE:
            ds = min(ds * GROWTH, settings.ds_max)


def _termination(branch: Branch, settings: ContinuationSettings) -> str:
    p = branch.points[-1]
    if p.lam >= settings.lambda_max:
        return "lambda_max"
    if p.lam <= settings.lambda_min:
        return "lambda_min"
    if p.sup_u >= settings.norm_max or p.sup_v >= settings.norm_max:
        return "norm_max"
    if branch.fold_count > settings.max_folds:
        return "fold_limit"
    return ""


def measure_direction(branch: Branch, k_points: int = 5, amplitude_cap: float = math.inf) -> str:
    """Empirical direction from the first ``k_points`` of a branch.

    Fits λ - λ* = slope·arc by least squares through the bifurcation point.
    """
    pts = [p for p in branch.points[:k_points] if p.sup_u <= amplitude_cap]
    if len(pts) < k_points:
        raise ValueError(f"need {k_points} small-amplitude points, branch has {len(pts)}")
    arc = np.array([p.arc for p in pts])
    dl = np.array([p.lam for p in pts]) - branch.lambda_star
    slope = float(arc @ dl / (arc @ arc))
    return "supercritical" if slope > 0 else "subcritical"


class HomotopyError(RuntimeError):
    def __init__(self, message: str, partial: list):
        super().__init__(message)
        self.partial = partial


def _check_homotopy_case(law: DiffusionLaw, params: ProblemParams, mesh: Mesh):
    if law(0.0) != 0.0:
        raise ValueError("epsilon_homotopy is for laws with a(0) = 0; use continue_branch")
    if not params.lam > 0:
        raise ValueError("target lambda must be positive")
    if not params.rho > 0:
        raise ValueError("rho must be positive")
    if params.b > 0 and not (h1_margin(params, mesh) > 0 or law.is_h2()):
        raise ValueError("b > 0 needs (H1) or (H2) for the homotopy to be bounded")


def _solve_at(law, params, guess: State, settings: NewtonSettings, mesh: Mesh) -> State:
    out = newton_solve(params, law, guess, settings, mesh)
    if out.converged_to != "coexistence":
        raise NewtonError(f"converged to a {out.converged_to} state", out.iterations, out.final_residual)
    return out.state


def epsilon_homotopy(law: DiffusionLaw, params: ProblemParams, eps_schedule,
                     settings: ContinuationSettings, mesh: Mesh) -> list:
    """Coexistence states of the system with a + ε at λ = ``params.lam``.

    The first ε is reached by continuation from ελ₁; every later ε is
    warm-started from the previous solution. Returns [(ε, State), ...].
    """
    _check_homotopy_case(law, params, mesh)
    eps_schedule = [float(e) for e in eps_schedule]
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be a non-empty list of positive values")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")

    results: list = []
    guess = None
    for eps in eps_schedule:
        law_eps = law.shifted(eps)
        try:
            if guess is None:
                guess = _reach_lambda(law_eps, params, settings, mesh)
            state = _solve_at(law_eps, params, guess, settings.newton, mesh)
        except (NewtonError, ContinuationError) as exc:
            raise HomotopyError(f"failed at eps={eps}: {exc}", results) from exc
        results.append((eps, state))
        guess = state
    return results


def _reach_lambda(law_eps, params, settings: ContinuationSettings, mesh: Mesh) -> State:
    target = params.lam
    if bifurcation_point(law_eps, mesh) >= target:
        raise ContinuationError("branch starts beyond the target lambda; use a smaller first epsilon")
    branch = continue_branch(law_eps, params, replace(settings, lambda_max=target), mesh)
    pts = branch.points
    for a, b in zip(pts, pts[1:]):
        if (a.lam - target) * (b.lam - target) <= 0:
            t = (target - a.lam) / (b.lam - a.lam) if b.lam != a.lam else 0.0
            return State(a.state.u + t * (b.state.u - a.state.u),
                         a.state.v + t * (b.state.v - a.state.v))
    raise ContinuationError(f"branch never reached lambda={target} (stopped: {branch.reason})")
