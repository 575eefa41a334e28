"""Problem definition: diffusion laws, parameters, the discrete residual and
the closed-form bifurcation quantities.

The system is

    -a(∫v) Δu = λu - u² + b u v,
    -Δv + σv  = ρu,               u = v = 0 on the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .mesh import Mesh, integrate, laplacian
from .spectral import dirichlet_eigenpair, solve_e_sigma

FAMILIES = ("constant", "affine", "power", "saturating")


@dataclass(frozen=True)
class DiffusionLaw:
    """Closed-form diffusion coefficient a(s).

    constant:   a0
    affine:     a0 + a1*s
    power:      a0 + a1*s**p   (p > 1)
    saturating: a0 + a1*s/(1+s)

    Negative arguments only show up in intermediate Newton iterates; there the
    power and saturating families use their odd extension about a0, which
    keeps a continuously differentiable.
    """

    family: str
    a0: float
    a1: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown law family {self.family!r}; expected one of {FAMILIES}")
        if self.a0 < 0 or self.a1 < 0:
            raise ValueError("law coefficients must be non-negative")
        if self.family == "power" and not self.p > 1:
            raise ValueError(f"power law needs p > 1, got {self.p}")

    def __call__(self, s: float) -> float:
        s = float(s)
        if self.family == "constant":
            return self.a0
        if self.family == "affine":
            return self.a0 + self.a1 * s
        if self.family == "power":
            return self.a0 + self.a1 * math.copysign(abs(s) ** self.p, s)
        return self.a0 + self.a1 * s / (1.0 + abs(s))

    def derivative(self, s: float) -> float:
        s = float(s)
        if self.family == "constant":
            return 0.0
        if self.family == "affine":
            return self.a1
        if self.family == "power":
            return self.a1 * self.p * abs(s) ** (self.p - 1.0)
        return self.a1 / (1.0 + abs(s)) ** 2

    def a_lower(self) -> float:
        """inf of a over [0, ∞); every family is nondecreasing there."""
        return self.a0

    def is_h2(self) -> bool:
        """a(s)/s → ∞ as s → ∞."""
        return self.family == "power" and self.p > 1 and self.a1 > 0

    def is_increasing(self) -> bool:
        return self.a1 >= 0

    def shifted(self, eps: float) -> "DiffusionLaw":
        """The law a + eps."""
        return replace(self, a0=self.a0 + eps)

    def scaled(self, c: float) -> "DiffusionLaw":
        return replace(self, a0=c * self.a0, a1=c * self.a1)


@dataclass(frozen=True)
class ProblemParams:
    lam: float
    b: float
    rho: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.rho < 0:
            raise ValueError(f"rho must be non-negative, got {self.rho}")

    def with_lambda(self, lam: float) -> "ProblemParams":
        return replace(self, lam=float(lam))


@dataclass(frozen=True)
class State:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if np.shape(self.u) != np.shape(self.v):
            raise ValueError("u and v must live on the same mesh")

    @classmethod
    def zeros(cls, mesh: Mesh) -> "State":
        return cls(np.zeros(mesh.node_count), np.zeros(mesh.node_count))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "State":
        n = len(x) // 2
        return cls(np.array(x[:n]), np.array(x[n:2 * n]))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.u)), np.max(np.abs(self.v))))


def _check_state(state: State, mesh: Mesh):
    mesh.check_field(state.u)
    mesh.check_field(state.v)


def residual(params: ProblemParams, law: DiffusionLaw, state: State, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Nodal residual of the discrete system; zero exactly at solutions."""
    _check_state(state, mesh)
    L = laplacian(mesh)
    u, v = state.u, state.v
    mass = integrate(mesh, v)
    r1 = law(mass) * (L @ u) - params.lam * u + u * u - params.b * u * v
    r2 = L @ v + params.sigma * v - params.rho * u
    return r1, r2


def bifurcation_point(law: DiffusionLaw, mesh: Mesh) -> float:
    """λ* = a(0)·λ₁ with the discrete λ₁."""
    a0 = law(0.0)
    if a0 == 0.0:
        return 0.0
    return a0 * dirichlet_eigenpair(mesh).value


def _require_source(params: ProblemParams):
    if not params.rho > 0:
        raise ValueError("rho must be positive here; with rho = 0 the system decouples into a logistic equation")


def kernel_basis(params: ProblemParams, mesh: Mesh) -> tuple[np.ndarray, np.ndarray, float]:
    """Kernel direction (φ₁, ψ₁ = Kφ₁) of the linearization at λ*."""
    _require_source(params)
    pair = dirichlet_eigenpair(mesh)
    K = params.rho / (pair.value + params.sigma)
    return pair.fn.copy(), K * pair.fn, K


def direction_threshold(params: ProblemParams, mesh: Mesh) -> float:
    """Critical a'(0) separating super- from subcritical bifurcation.

    Uses ∫φ₁² = 1, which the spectral module guarantees.
    """
    _require_source(params)
    pair = dirichlet_eigenpair(mesh)
    lam1, phi = pair.value, pair.fn
    num = (params.b * params.rho - lam1 - params.sigma) * integrate(mesh, phi**3)
    return num / (lam1 * params.rho * integrate(mesh, phi))


class Direction(NamedTuple):
    label: str
    threshold: float
    rho1: float
    slope: float


def classify_direction(law: DiffusionLaw, params: ProblemParams, mesh: Mesh,
                       margin: Optional[float] = None) -> Direction:
    """Label the bifurcation at λ* as supercritical, subcritical or marginal.

    ``rho1`` is the first-order speed dλ/ds along u = s(φ₁ + ...).
    """
    T = direction_threshold(params, mesh)
    if margin is None:
        margin = 1e-6 * (1.0 + abs(T))
    pair = dirichlet_eigenpair(mesh)
    lam1, phi = pair.value, pair.fn
    _, _, K = kernel_basis(params, mesh)
    slope = law.derivative(0.0)
    rho1 = slope * lam1 * K * integrate(mesh, phi) + (1.0 - params.b * K) * integrate(mesh, phi**3)
    if slope > T + margin:
        label = "supercritical"
    elif slope < T - margin:
        label = "subcritical"
    else:
        label = "marginal"
    return Direction(label, T, rho1, slope)


def h1_margin(params: ProblemParams, mesh: Mesh) -> float:
    """1 - bρ‖e_σ‖∞; positive exactly when (H1) holds on the mesh."""
    if params.b == 0 or params.rho == 0:
        return 1.0
    return 1.0 - params.b * params.rho * float(np.max(solve_e_sigma(params.sigma, mesh)))


@dataclass
class BoundReport:
    case: str
    u_bound: Optional[float]
    v_bound_field: Optional[np.ndarray]
    slack: float
    satisfied: Optional[bool] = None
    worst_violation: Optional[float] = None

    def evaluate(self, state: State) -> "BoundReport":
        """Check a state nodally against the bounds; h2_probe passes vacuously."""
        if self.case == "h2_probe":
            return replace(self, satisfied=True, worst_violation=0.0)
        worst = max(float(np.max(state.u - self.u_bound)),
                    float(np.max(state.v - self.v_bound_field)))
        return replace(self, satisfied=worst <= self.slack, worst_violation=worst)


def bound_case(params: ProblemParams, mesh: Mesh) -> str:
    if params.b <= 0:
        return "b_nonpos"
    return "h1" if h1_margin(params, mesh) > 0 else "h2_probe"


def apriori_bounds(params: ProblemParams, law: DiffusionLaw, mesh: Mesh) -> BoundReport:
    """A priori sup bounds for coexistence states at the given λ."""
    lam, rho = params.lam, params.rho
    slack = 1e-6 * (1.0 + abs(lam))
    e = solve_e_sigma(params.sigma, mesh)
    case = bound_case(params, mesh)
    if case == "b_nonpos":
        return BoundReport(case, lam, rho * lam * e, slack)
    if case == "h1":
        m = h1_margin(params, mesh)
        v_sup = rho * lam * float(e.max()) / m
        return BoundReport(case, lam / m, np.full(mesh.node_count, v_sup), slack)
    return BoundReport(case, None, None, slack)


def nonexistence_threshold(law: DiffusionLaw, mesh: Mesh, case: str) -> float:
    """λ below (or at) which no coexistence state exists."""
    if case == "b_nonpos":
        return law.a_lower() * dirichlet_eigenpair(mesh).value
    if case == "h1":
        return 0.0
    if case == "h2_probe":
        raise ValueError("no closed-form nonexistence threshold under (H2); probe it by continuation")
    raise ValueError(f"unknown case {case!r}")
