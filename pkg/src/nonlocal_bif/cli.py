"""Command line interface.

    nonlocal-bif {eig,branch,probe,epsilon,verify} --config run.json [--out DIR]
                 [--seed N] [--threads N]

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 verification failure. Errors are written to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .continuation import (Branch, ContinuationError, ContinuationSettings, HomotopyError,
                           continue_branch, epsilon_homotopy)
from .mesh import Mesh, build_mesh
from .model import (DiffusionLaw, ProblemParams, State, bifurcation_point, classify_direction,
                    kernel_basis)
from .nonlinear import LinearSolveError, NewtonError, NewtonSettings, multistart_probe, newton_solve
from .spectral import EigenSolverError, dirichlet_eigenpair
from .verify import check_all

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

SOLVER_ERRORS = (NewtonError, ContinuationError, HomotopyError, LinearSolveError, EigenSolverError)

BRANCH_COLUMNS = ("step", "lambda", "arc", "sup_u", "sup_v", "mass_v", "fold_count")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class VerificationFailure(RuntimeError):
    pass


def _schema() -> dict:
    text = resources.files("nonlocal_bif").joinpath("config_schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    mesh: Mesh
    law: DiffusionLaw
    b: float
    rho: float
    sigma: float
    lam: Optional[float] = None
    lambda_window: Optional[tuple] = None
    newton: NewtonSettings = NewtonSettings()
    continuation: ContinuationSettings = ContinuationSettings()
    eps_schedule: Optional[tuple] = None
    k: int = 20
    amplitude: tuple = (0.1, 30.0)
    sweep: tuple = ()
    seed: int = 0

    def params(self, lam: Optional[float] = None, **override) -> ProblemParams:
        lam = self.lam if lam is None else lam
        values = dict(b=self.b, rho=self.rho, sigma=self.sigma)
        values.update(override)
        return ProblemParams(math.nan if lam is None else float(lam), **values)

    def require_lambda(self) -> float:
        if self.lam is None:
            raise ConfigError("params.lambda", "this command needs a lambda value")
        return self.lam


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def parse_config(doc: dict) -> RunConfig:
    """Validate a config document and build a :class:`RunConfig`."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        path = ".".join(str(p) for p in exc.absolute_path)
        raise ConfigError(path, exc.message) from None

    m = doc["mesh"]
    if len(m["extents"]) != m["dim"] or len(m["n"]) != m["dim"]:
        raise ConfigError("mesh", "extents and n need one entry per dimension")
    mesh = _wrap("mesh", build_mesh, m["dim"], m["extents"], m["n"])

    lw = doc["law"]
    law = _wrap("law", DiffusionLaw, lw["family"], float(lw["a0"]),
                float(lw.get("a1", 0.0)), float(lw.get("p", 2.0)))

    p = doc["params"]
    window = p.get("lambda_window")
    if window is not None and not window[0] < window[1]:
        raise ConfigError("params.lambda_window", "lower end must be below upper end")

    newton = _wrap("newton", NewtonSettings, **doc.get("newton", {}))
    cont_opts = dict(doc.get("continuation", {}))
    if window is not None:
        cont_opts.setdefault("lambda_min", float(window[0]))
        cont_opts.setdefault("lambda_max", float(window[1]))
    continuation = _wrap("continuation", ContinuationSettings, newton=newton, **cont_opts)

    eps = None
    if "epsilon" in doc:
        eps = tuple(float(e) for e in doc["epsilon"]["schedule"])
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ConfigError("epsilon.schedule", "must be strictly decreasing")

    probe = doc.get("probe", {})
    amplitude = tuple(float(a) for a in probe.get("amplitude", (0.1, 30.0)))
    if amplitude[0] > amplitude[1]:
        raise ConfigError("probe.amplitude", "lower end must not exceed upper end")

    return RunConfig(
        mesh=mesh, law=law, b=float(p["b"]), rho=float(p["rho"]), sigma=float(p["sigma"]),
        lam=float(p["lambda"]) if "lambda" in p else None,
        lambda_window=tuple(window) if window is not None else None,
        newton=newton, continuation=continuation, eps_schedule=eps,
        k=int(probe.get("k", 20)), amplitude=amplitude,
        sweep=tuple(doc.get("sweep", ())), seed=int(doc.get("seed", 0)),
    )


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("", f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None
    return parse_config(doc)


def _num(x: float):
    """JSON-safe float (non-finite values become strings)."""
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(out: Optional[Path], name: str, text: str):
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def branch_csv(branch: Branch, window: Optional[tuple] = None) -> str:
    """Branch table with shortest round-trip float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BRANCH_COLUMNS)
    step = 0
    for _, lam, arc, su, sv, mv, folds in branch.rows():
        if window is not None and not window[0] <= lam <= window[1]:
            continue
        writer.writerow([step, repr(lam), repr(arc), repr(su), repr(sv), repr(mv), folds])
        step += 1
    return buf.getvalue()


def cmd_eig(cfg: RunConfig, out: Optional[Path] = None, threads: int = 1) -> dict:
    """Spectral data, bifurcation point and predicted direction."""
    pair = dirichlet_eigenpair(cfg.mesh)
    lam_star = bifurcation_point(cfg.law, cfg.mesh)
    result = {"command": "eig", "lambda1": pair.value, "lambda_star": lam_star}
    params = cfg.params()
    if cfg.rho > 0:
        _, _, K = kernel_basis(params, cfg.mesh)
        result["K"] = K
    if cfg.law(0.0) == 0.0:
        result["classification"] = "degenerate"
        result["note"] = "a(0) = 0: no bifurcation from the trivial branch; run the 'epsilon' command"
    elif cfg.rho > 0:
        d = classify_direction(cfg.law, params, cfg.mesh)
        result.update(threshold=d.threshold, a_prime_0=d.slope, rho1=d.rho1, classification=d.label)
    else:
        result["classification"] = "decoupled"
        result["note"] = "rho = 0: v vanishes and u solves a logistic equation"
    _write(out, "eig.json", _dump_json(result))
    return result


def _verify_branch(branch: Branch, cfg: RunConfig, params: ProblemParams) -> dict:
    worst: dict = {}
    failures = []
    for i, pt in enumerate(branch.points):
        rep = check_all(pt.state, params.with_lambda(pt.lam), cfg.law, cfg.mesh)
        for c in rep.checks:
            if c.name not in worst or c.worst_violation > worst[c.name]["worst_violation"]:
                worst[c.name] = {"worst_violation": c.worst_violation, "slack": c.slack}
        if not rep.overall:
            failures.append({"step": i, "failed": rep.failed()})
    return {"overall": not failures, "failures": failures, "worst": worst}


def cmd_branch(cfg: RunConfig, out: Optional[Path] = None, threads: int = 1) -> dict:
    """Continue the branch (or a sweep of branches) and write CSV + report."""
    if not cfg.law(0.0) > 0:
        raise ConfigError("law.a0", "branch needs a(0) > 0; use the 'epsilon' command for a(0) = 0")
    if not cfg.rho > 0:
        raise ConfigError("params.rho", "branch needs rho > 0")
    entries = [dict(e) for e in cfg.sweep] or [{}]
    for j, e in enumerate(entries):
        if "rho" in e and not e["rho"] > 0:
            raise ConfigError(f"sweep.{j}.rho", "branch needs rho > 0")

    def run(entry: dict):
        params = cfg.params(0.0, **entry)
        branch = continue_branch(cfg.law, params, cfg.continuation, cfg.mesh)
        return params, branch

    if threads > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, entries))
    else:
        results = [run(e) for e in entries]

    reports = []
    csvs = []
    for j, (params, branch) in enumerate(results):
        window = cfg.lambda_window
        in_window = [p for p in branch.points if window is None or window[0] <= p.lam <= window[1]]
        direction = classify_direction(cfg.law, params, cfg.mesh)
        rep = {
            "entry": j,
            "params": {"b": params.b, "rho": params.rho, "sigma": params.sigma},
            "lambda_star": branch.lambda_star,
            "predicted_direction": direction.label,
            "termination": branch.reason,
            "fold_count": branch.fold_count,
            "points": len(branch.points),
            "coexistence_points_in_window": len(in_window),
            "lambda_range": [_num(min(branch.lambdas())), _num(max(branch.lambdas()))],
            "verify": _verify_branch(branch, cfg, params),
        }
        reports.append(rep)
        csvs.append(branch_csv(branch, window))

    report = {"command": "branch", "branches": reports,
              "overall": all(r["verify"]["overall"] for r in reports)}
    _write(out, "branch_report.json", _dump_json(report))
    if not report["overall"]:
        raise VerificationFailure("a branch point failed verification; CSV not written")
    for j, text in enumerate(csvs):
        _write(out, "branch.csv" if len(csvs) == 1 else f"branch_{j:03d}.csv", text)
    report["csv"] = csvs
    return report


def cmd_probe(cfg: RunConfig, out: Optional[Path] = None, threads: int = 1) -> dict:
    """Multistart Newton at a fixed lambda; counts distinct coexistence states."""
    lam = cfg.require_lambda()
    if not cfg.rho > 0:
        raise ConfigError("params.rho", "probe needs rho > 0")
    params = cfg.params(lam)
    res = multistart_probe(params, cfg.law, cfg.k, cfg.seed, cfg.amplitude, cfg.newton,
                           cfg.mesh, threads=threads)
    for o in res.coexistence:
        rep = check_all(o.state, params, cfg.law, cfg.mesh)
        if not rep.overall:
            raise VerificationFailure(f"coexistence state failed checks: {rep.failed()}")
    starts = []
    for j, o in enumerate(res.starts):
        starts.append({
            "start": j, "converged_to": o.converged_to, "iterations": o.iterations,
            "final_residual": _num(o.final_residual),
            "sup_u": _num(np.max(o.state.u)), "sup_v": _num(np.max(o.state.v)),
            **({"error": o.error} if o.error else {}),
        })
    result = {
        "command": "probe", "lambda": lam, "k": cfg.k, "seed": cfg.seed,
        "distinct_coexistence": len(res.coexistence),
        "distinct": [{"converged_to": o.converged_to, "sup_u": _num(np.max(o.state.u)),
                      "sup_v": _num(np.max(o.state.v))} for o in res.distinct],
        "starts": starts,
    }
    _write(out, "probe.json", _dump_json(result))
    return result


def cmd_epsilon(cfg: RunConfig, out: Optional[Path] = None, threads: int = 1) -> dict:
    """ε-homotopy towards a law with a(0) = 0; writes the Cauchy-gap table."""
    if cfg.law(0.0) != 0.0:
        raise ConfigError("law.a0", "epsilon needs a(0) = 0; use the 'branch' command")
    lam = cfg.require_lambda()
    if cfg.eps_schedule is None:
        raise ConfigError("epsilon.schedule", "missing epsilon schedule")
    params = cfg.params(lam)
    try:
        seq = epsilon_homotopy(cfg.law, params, cfg.eps_schedule, cfg.continuation, cfg.mesh)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from exc

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("eps", "sup_u", "sup_v", "cauchy_gap"))
    gaps = []
    prev = None
    for eps, state in seq:
        rep = check_all(state, params, cfg.law.shifted(eps), cfg.mesh)
        if not rep.overall:
            raise VerificationFailure(f"eps={eps}: failed checks {rep.failed()}")
        gap = "" if prev is None else repr(float(max(np.max(np.abs(state.u - prev.u)),
                                                      np.max(np.abs(state.v - prev.v)))))
        if gap:
            gaps.append(float(gap))
        writer.writerow([repr(eps), repr(float(np.max(state.u))), repr(float(np.max(state.v))), gap])
        prev = state
    text = buf.getvalue()
    _write(out, "epsilon.csv", text)
    return {"command": "epsilon", "csv": text, "gaps": gaps,
            "gaps_decreasing": all(b < a for a, b in zip(gaps, gaps[1:]))}


def cmd_verify(cfg: RunConfig, out: Optional[Path] = None, threads: int = 1) -> dict:
    """Solve at the configured lambda from a φ₁-shaped start and run every check."""
    lam = cfg.require_lambda()
    if not cfg.rho > 0:
        raise ConfigError("params.rho", "verify needs rho > 0")
    params = cfg.params(lam)
    phi, _, K = kernel_basis(params, cfg.mesh)
    u0 = max(abs(lam), 1.0) * phi / np.max(phi)
    outcome = newton_solve(params, cfg.law, State(u0, K * u0), cfg.newton, cfg.mesh)
    rep = check_all(outcome.state, params, cfg.law, cfg.mesh)
    result = {"command": "verify", "lambda": lam, "converged_to": outcome.converged_to,
              "iterations": outcome.iterations, "final_residual": outcome.final_residual,
              "sup_u": float(np.max(outcome.state.u)), "sup_v": float(np.max(outcome.state.v)),
              "report": rep.to_dict()}
    _write(out, "verify_report.json", _dump_json(result))
    if not rep.overall:
        raise VerificationFailure(f"failed checks: {rep.failed()}")
    return result


COMMANDS = {"eig": cmd_eig, "branch": cmd_branch, "probe": cmd_probe,
            "epsilon": cmd_epsilon, "verify": cmd_verify}


def _summary(result: dict) -> dict:
    return {k: v for k, v in result.items() if k != "csv"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nonlocal-bif", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="run configuration (JSON)")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--threads", type=int, default=1, help="worker pool size")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed", "must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        out = Path(args.out) if args.out else None
        result = COMMANDS[args.command](cfg, out, args.threads)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config_error", str(exc), exc.path)
    except SOLVER_ERRORS as exc:
        return _fail(EXIT_SOLVER, "solver_failure", str(exc))
    except VerificationFailure as exc:
        return _fail(EXIT_VERIFY, "verification_failure", str(exc))
    sys.stdout.write(_dump_json(_summary(result)))
    return EXIT_OK


def _fail(code: int, kind: str, message: str, path: Optional[str] = None) -> int:
    err = {"error": kind, "message": message}
    if path:
        err["path"] = path
    sys.stderr.write(json.dumps(err) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
