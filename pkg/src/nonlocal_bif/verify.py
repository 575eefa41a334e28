"""Checks that turn the analytic properties of solutions into assertions on
computed states: classification, a priori bounds, the mass identity
∫v = ρ∫e_σu, the max-point relation σ·max v ≤ ρ·max u, and the principal
eigenvalue characterization λ = σ₁[-a(∫v)Δ + u - bv].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, integrate
from .spectral import principal_eigenpair, solve_e_sigma

REDUCTION_TOL = 1e-8
MAXPOINT_REL = 1e-8


def classify(state, tol: float) -> str:
    """'trivial', 'coexistence' or 'invalid' (semi-trivial, sign-changing...)."""
    nu = float(np.max(np.abs(state.u)))
    nv = float(np.max(np.abs(state.v)))
    if nu <= tol and nv <= tol:
        return "trivial"
    if np.all(state.u > 0) and np.all(state.v > 0):
        return "coexistence"
    return "invalid"


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst_violation: float
    slack: float


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, violation: float, slack: float) -> "VerifyReport":
        self.checks.append(Check(name, bool(violation <= slack), float(violation), float(slack)))
        return self

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "checks": [
                {"name": c.name, "passed": c.passed,
                 "worst_violation": c.worst_violation, "slack": c.slack}
                for c in self.checks
            ],
        }


def check_bounds(state, params, law, mesh: Mesh) -> VerifyReport:
    """Nodal a priori bounds for the parameter case (vacuous under (H2))."""
    from .model import apriori_bounds

    report = VerifyReport()
    bounds = apriori_bounds(params, law, mesh)
    if bounds.case == "h2_probe":
        return report
    slack = 1e-6 * (1.0 + abs(params.lam))
    report.add(f"u_bound[{bounds.case}]", float(np.max(state.u - bounds.u_bound)), slack)
    report.add(f"v_bound[{bounds.case}]", float(np.max(state.v - bounds.v_bound_field)), slack)
    return report


def check_reduction(state, params, mesh: Mesh) -> float:
    """|∫v - ρ∫e_σu| / (1 + ∫v)."""
    mass = integrate(mesh, state.v)
    if not np.any(state.u) and not np.any(state.v):
        return 0.0
    e = solve_e_sigma(params.sigma, mesh)
    return abs(mass - params.rho * integrate(mesh, e * state.u)) / (1.0 + abs(mass))


def check_eigen_characterization(state, params, law, mesh: Mesh, eig_tol: float = 1e-10) -> float:
    """|σ₁[-a(∫v)Δ + u - bv] - λ|.

    For a coexistence state u is the positive eigenfunction of this operator,
    so the gap measures how far the state is from solving the u-equation.
    """
    d = law(integrate(mesh, state.v))
    if not d > 0:
        raise ValueError(f"diffusion a(∫v) = {d} is not positive")
    pair = principal_eigenpair(d, state.u - params.b * state.v, mesh, tol=eig_tol)
    return abs(pair.value - params.lam)


def max_point_violation(state, params) -> float:
    """σ·max v - ρ·max u, relative to ρ·max u."""
    um = float(np.max(state.u))
    vm = float(np.max(state.v))
    return (params.sigma * vm - params.rho * um) / max(params.rho * um, 1e-300)


def check_all(state, params, law, mesh: Mesh) -> VerifyReport:
    """Every applicable check for a converged state."""
    from .nonlinear import trivial_tol

    report = VerifyReport()
    kind = classify(state, trivial_tol(params))
    report.add("classification", 0.0 if kind in ("trivial", "coexistence") else 1.0, 0.0)
    if kind != "coexistence":
        return report
    report.checks.extend(check_bounds(state, params, law, mesh).checks)
    report.add("reduction_identity", check_reduction(state, params, mesh), REDUCTION_TOL)
    report.add("max_point", max_point_violation(state, params), MAXPOINT_REL)
    report.add("eigen_characterization",
               check_eigen_characterization(state, params, law, mesh),
               1e-6 * (1.0 + abs(params.lam)))
    return report
