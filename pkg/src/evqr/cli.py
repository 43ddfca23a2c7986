"""Command-line front end.

Exit codes: 0 success, 2 validation or feasibility failure, 3 convergence
failure (or failed certification), 4 I/O or parse error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import gaussian as gs
from . import io
from .errors import ConstraintInfeasible, NoConvergence, NotPSD, SingularMatrix, SizeGuard
from .measures import Problem, validate_problem
from .oracle import oracle_compare
from .solver import Potentials, SolverOptions, solve

logger = logging.getLogger("evqr")

EXIT_OK, EXIT_INFEASIBLE, EXIT_NOCONV, EXIT_IO = 0, 2, 3, 4
ORACLE_THRESHOLDS = {"coupling_l1_gap": 1e-6, "value_gap": 1e-8, "potential_sup_gap": 1e-6}


@dataclass
class RunConfig:
    epsilon: float = 1.0
    tol: float = 1e-9
    max_sweeps: int = 10000
    threads: int = 1
    seed: int = 0
    random_init: bool = False
    inner_tol: float = 1e-12
    inner_max_iter: int = 50

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")
        self.solver_options()

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            tol=self.tol, max_sweeps=self.max_sweeps, inner_tol=self.inner_tol, inner_max_iter=self.inner_max_iter
        )

    def echo(self) -> dict:
        # threads only affects scheduling, and outputs must not depend on it
        d = asdict(self)
        d.pop("threads")
        return d


def _config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise io.InputError(f"{args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(base) - known
        if unknown:
            raise io.InputError(f"{args.config}: unknown keys {sorted(unknown)}")
    for f in fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            base[f.name] = val
    return RunConfig(**base)


def _load_problem(mu_csv, nu_csv, epsilon) -> Problem:
    mu = io.read_mu_csv(mu_csv)
    nu, d_x = io.read_nu_csv(nu_csv)
    if nu.dim - d_x != mu.dim:
        raise io.InputError(f"{nu_csv}: y has {nu.dim - d_x} columns but u has {mu.dim}")
    return Problem(mu, nu, epsilon)


def _initial_potentials(p: Problem, cfg: RunConfig) -> Optional[Potentials]:
    if not cfg.random_init:
        return None
    rng = np.random.default_rng(cfg.seed)
    return Potentials(rng.standard_normal(p.n), rng.standard_normal((p.n, p.d_x)), rng.standard_normal(p.m))


def cmd_validate(args) -> int:
    p = _load_problem(args.mu, args.nu, 1.0)
    rep = validate_problem(p)
    out = rep.to_dict()
    out["centering_shift"] = p.centering_shift.tolist()
    sys.stdout.write(io.dumps_json(out))
    return EXIT_OK if rep.feasible else EXIT_INFEASIBLE


def cmd_solve(args) -> int:
    cfg = _config(args)
    p = _load_problem(args.mu, args.nu, cfg.epsilon)
    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        cpl, pots, rep = solve(p, cfg.solver_options(), init=_initial_potentials(p, cfg), threads=cfg.threads)
    except ConstraintInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoConvergence as exc:
        if getattr(exc, "result", None) is None:
            print(f"no convergence: {exc}", file=sys.stderr)
            return EXIT_NOCONV
        cpl, pots, rep = exc.result
        print(f"no convergence: {exc}", file=sys.stderr)
        status = EXIT_NOCONV
    logger.info("solve took %.3fs over %d sweeps", time.perf_counter() - t0, rep.sweeps)
    if args.out_coupling:
        io.write_coupling_csv(args.out_coupling, cpl.pi)
    if args.out_potentials:
        io.write_potentials_csv(args.out_potentials, pots.f, pots.g, pots.h)
    report = {
        **rep.to_dict(),
        "n": p.n,
        "m": p.m,
        "d_x": p.d_x,
        "d_y": p.d_y,
        "centering_shift": p.centering_shift.tolist(),
        "config": cfg.echo(),
    }
    if args.report:
        io.write_json(args.report, report)
    else:
        sys.stdout.write(io.dumps_json(report))
    return status


def cmd_gaussian(args) -> int:
    try:
        model = gs.GaussianModel.from_json(args.model)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, NotPSD):
            print(f"invalid model: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        raise io.InputError(f"{args.model}: {exc}") from exc
    eps = args.epsilon
    if eps <= 0:
        raise ValueError("--epsilon must be positive")
    lam = gs.lambda_eps(model, eps)
    cpl = gs.optimal_gaussian_coupling(model, eps)
    pots = gs.gaussian_dual_potentials(model, eps)
    uy, uu, xu = gs.precision_blocks(cpl, eps)
    rng = np.random.default_rng(args.seed)
    pts = rng.standard_normal((100, cpl.gamma.shape[0]))
    report = {
        "epsilon": eps,
        "model": model.to_dict(),
        "lambda": lam.tolist(),
        "lambda_limit": gs.lambda_eps(model, 0.0).tolist(),
        "mean": cpl.mean.tolist(),
        "gamma": cpl.gamma.tolist(),
        "potentials": pots.to_dict(),
        "riccati_residual": gs.riccati_residual(model, lam, eps),
        "precision_residuals": {"theta_uy": uy, "theta_uu": uu, "theta_xu": xu},
        "log_density_identity_residual": gs.log_density_identity_residual(model, eps, pts),
        "w2_exact": gs.w2_exact(model, eps),
        "w2_first_order_coefficient": gs.w2_first_order(model),
        "seed": args.seed,
    }
    if args.report:
        io.write_json(args.report, report)
    else:
        sys.stdout.write(io.dumps_json(report))
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise io.InputError(f"--eps-grid: {exc}") from None
    if any(not e > 0 for e in grid):
        raise io.InputError("--eps-grid: values must be positive")
    return grid


def cmd_sweep(args) -> int:
    try:
        model = gs.GaussianModel.from_json(args.model)
    except NotPSD as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise io.InputError(f"{args.model}: {exc}") from exc
    rows = gs.sweep_epsilon(model, _parse_grid(args.eps_grid))
    header = ["epsilon", "w2_exact", "first_order", "ratio", "residual_over_eps2"]
    lines = [",".join(header)] + [
        ",".join(io.fmt(getattr(r, k if k != "epsilon" else "epsilon")) for k in header) for r in rows
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args)
    p = _load_problem(args.mu, args.nu, cfg.epsilon)
    try:
        cmp = oracle_compare(p, cfg.solver_options(), threads=cfg.threads)
    except (SizeGuard, ConstraintInfeasible) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    report = {**cmp.to_dict(), "thresholds": ORACLE_THRESHOLDS, "config": cfg.echo()}
    passed = all(report[k] <= v for k, v in ORACLE_THRESHOLDS.items())
    report["passed"] = passed
    if args.report:
        io.write_json(args.report, report)
    else:
        sys.stdout.write(io.dumps_json(report))
    return EXIT_OK if passed else EXIT_NOCONV


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evqr", description="Entropic vector quantile regression solvers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_opts(sp, with_solver=True):
        sp.add_argument("--mu", required=True, help="reference measure CSV (w,u1,...)")
        sp.add_argument("--nu", required=True, help="data measure CSV (w,x1,...,y1,...)")
        if with_solver:
            sp.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
            sp.add_argument("--epsilon", type=float)
            sp.add_argument("--tol", type=float)
            sp.add_argument("--max-sweeps", dest="max_sweeps", type=int)
            sp.add_argument("--threads", type=int)
            sp.add_argument("--seed", type=int)
            sp.add_argument("--random-init", dest="random_init", action="store_const", const=True,
                            help="start from seeded random potentials instead of zeros")

    sp = sub.add_parser("validate", help="check the covariate moment condition")
    run_opts(sp, with_solver=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="solve a discrete instance")
    run_opts(sp)
    sp.add_argument("--out-coupling", dest="out_coupling")
    sp.add_argument("--out-potentials", dest="out_potentials")
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("gaussian", help="closed-form Gaussian solution")
    sp.add_argument("--model", required=True)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--report")
    sp.add_argument("--seed", type=int, default=0, help="seed for the density-identity sample points")
    sp.set_defaults(func=cmd_gaussian)

    sp = sub.add_parser("sweep", help="W2 expansion check over an epsilon grid")
    sp.add_argument("--model", required=True)
    sp.add_argument("--eps-grid", dest="eps_grid", required=True, help="comma-separated epsilons")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="certify the block solver against the dense Newton oracle")
    run_opts(sp)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except io.InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NotPSD, SingularMatrix, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
