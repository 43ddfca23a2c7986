"""Reference solver for tiny instances: global damped Newton on the full dual.

The unknown is the stacked vector ``z = (f, vec(g), h)`` and the dual is
maximized with the gauge pinned by the linear constraints
``sum_i a_i f_i = 0`` and ``sum_i a_i g_i = 0`` inside the KKT system. This
shares nothing with the block-coordinate path except the problem data.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ConstraintInfeasible, NoConvergence, SizeGuard
from .measures import Problem, validate_problem
from .solver import Coupling, Potentials, SolverOptions

MAX_PAIRS = 200
MAX_ITER = 500
KKT_TOL = 1e-13
MAX_LOG_STEP = 20.0


@dataclass(frozen=True)
class OracleResult:
    pi: Coupling
    value: float
    kkt_residual: float
    potentials: Potentials
    iterations: int


def _unpack(p: Problem, z: np.ndarray):
    n, m, dx = p.n, p.m, p.d_x
    return z[:n], z[n:n + n * dx].reshape(n, dx), z[n + n * dx:]


def _log_pi(p: Problem, z: np.ndarray) -> np.ndarray:
    f, g, h = _unpack(p, z)
    kern = (f[:, None] + g @ p.x.T + h[None, :] - p.cost) / p.epsilon
    return np.log(p.a)[:, None] + np.log(p.b)[None, :] + kern


def _dual(p: Problem, z: np.ndarray) -> float:
    f, _, h = _unpack(p, z)
    lp = _log_pi(p, z)
    top = lp.max()
    # mass = exp(top) * sum exp(lp - top), kept finite for far-off trial points
    if top > 700:
        return -np.inf
    return float(p.a @ f + p.b @ h - p.epsilon * (np.exp(lp).sum() - 1.0))


def _features(p: Problem) -> np.ndarray:
    """Row (i, j) holds the derivative of the (i, j) log-kernel numerator w.r.t. ``z``."""
    n, m, dx = p.n, p.m, p.d_x
    e = np.zeros((n * m, n + n * dx + m))
    for i in range(n):
        for j in range(m):
            r = i * m + j
            e[r, i] = 1.0
            e[r, n + i * dx:n + (i + 1) * dx] = p.x[j]
            e[r, n + n * dx + j] = 1.0
    return e


def _constraints(p: Problem) -> np.ndarray:
    n, m, dx = p.n, p.m, p.d_x
    c = np.zeros((1 + dx, n + n * dx + m))
    c[0, :n] = p.a
    for k in range(dx):
        c[1 + k, n + k:n + n * dx:dx] = p.a
    return c


def _kkt_residual(p: Problem, pi: np.ndarray) -> float:
    res = [
        np.abs(pi.sum(axis=1) - p.a).max(),
        np.abs(pi.sum(axis=0) - p.b).max(),
    ]
    if p.d_x:
        res.append(np.linalg.norm(pi @ p.x, axis=1).max())
    return float(max(res))


def _lse(z, axis):
    top = z.max(axis=axis, keepdims=True)
    return (top + np.log(np.exp(z - top).sum(axis=axis, keepdims=True))).squeeze(axis)


def _normalized_start(p: Problem) -> np.ndarray:
    """Zero tilt, with ``f`` then ``h`` set so rows and then columns carry the right mass.

    Starting from zero potentials, rows with large costs hold mass near
    ``exp(-c/eps)`` and the Newton system is hopelessly scaled.
    """
    eps = p.epsilon
    f = -eps * _lse(np.log(p.b)[None, :] - p.cost / eps, axis=1)
    h = -eps * _lse(np.log(p.a)[:, None] + (f[:, None] - p.cost) / eps, axis=0)
    shift = p.a @ f
    return np.concatenate([f - shift, np.zeros(p.n * p.d_x), h + shift])


def oracle_solve(p: Problem) -> OracleResult:
    """Maximize the entropic VQR dual by damped Newton on the complete Hessian.

    Raises
    ------
    SizeGuard
        If ``n * m`` exceeds 200.
    ConstraintInfeasible
        If the covariate second moment is singular.
    NoConvergence
        If the KKT residual does not reach 1e-13 within 500 Newton steps.
    """
    if p.n * p.m > MAX_PAIRS:
        raise SizeGuard(f"oracle is limited to n*m <= {MAX_PAIRS}, got {p.n}*{p.m}={p.n * p.m}")
    check = validate_problem(p)
    if not check.feasible:
        raise ConstraintInfeasible("; ".join(check.messages))
    feats = _features(p)
    cons = _constraints(p)
    nz, nc = feats.shape[1], cons.shape[0]
    z = _normalized_start(p)
    val = _dual(p, z)
    for it in range(MAX_ITER):
        pi = np.exp(_log_pi(p, z))
        f, g, h = _unpack(p, z)
        grad = np.concatenate([p.a - pi.sum(axis=1), -(pi @ p.x).ravel(), p.b - pi.sum(axis=0)])
        if _kkt_residual(p, pi) <= KKT_TOL:
            break
        w = pi.ravel() / p.epsilon
        hess = (feats * w[:, None]).T @ feats
        kkt = np.block([[hess, cons.T], [cons, np.zeros((nc, nc))]])
        rhs = np.concatenate([grad, np.zeros(nc)])
        try:
            step = np.linalg.solve(kkt, rhs)[:nz]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:nz]
        # cap the largest change of any log-coupling entry; from a cold start
        # the Hessian is dominated by a few saturated entries
        spread = np.abs(feats @ step).max() / p.epsilon
        if spread > MAX_LOG_STEP:
            step *= MAX_LOG_STEP / spread
        slope = float(grad @ step)
        t = 1.0
        slack = 16 * np.finfo(float).eps * (abs(val) + 1.0)
        for _ in range(60):
            trial = z + t * step
            tval = _dual(p, trial)
            if tval >= val + 1e-4 * t * slope - slack:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"oracle line search failed at iteration {it}")
        z, val = trial, tval
    else:
        raise NoConvergence(f"oracle did not converge in {MAX_ITER} iterations")
    pi = np.exp(_log_pi(p, z))
    f, g, h = _unpack(p, z)
    return OracleResult(
        pi=Coupling(pi),
        value=_dual(p, z),
        kkt_residual=_kkt_residual(p, pi),
        potentials=Potentials(f, g, h),
        iterations=it,
    )


@dataclass(frozen=True)
class OracleComparison:
    coupling_l1_gap: float
    value_gap: float
    potential_sup_gap: float
    oracle_kkt_residual: float
    solver_sweeps: int

    def to_dict(self) -> dict:
        return asdict(self)


def oracle_compare(p: Problem, opts: Optional[SolverOptions] = None, threads: int = 1) -> OracleComparison:
    """Run both solvers on ``p`` and report how far apart they land.

    ``value_gap`` is relative, ``|D_oracle - D_block| / (1 + |D_oracle|)``; the
    potential gap is a sup-norm after gauge fixing both sides. If either side
    rejects the instance as infeasible, both must, and ``ConstraintInfeasible``
    is raised.
    """
    from .solver import dual_value, gauge_fix, solve

    outcomes = []
    for run in (lambda: oracle_solve(p), lambda: solve(p, opts, threads=threads)):
        try:
            outcomes.append(run())
        except ConstraintInfeasible as exc:
            outcomes.append(exc)
    infeasible = [isinstance(o, ConstraintInfeasible) for o in outcomes]
    if all(infeasible):
        raise ConstraintInfeasible(f"both solvers reject the instance: {outcomes[0]}")
    if any(infeasible):
        raise RuntimeError(
            "solvers disagree on feasibility: "
            f"oracle={outcomes[0]!r}, block={outcomes[1]!r}"
        )
    orc, (cpl, pots, rep) = outcomes
    return OracleComparison(
        coupling_l1_gap=float(np.abs(orc.pi.pi - cpl.pi).sum()),
        value_gap=abs(orc.value - dual_value(p, pots)) / (1.0 + abs(orc.value)),
        potential_sup_gap=gauge_fix(p, orc.potentials).sup_distance(gauge_fix(p, pots)),
        oracle_kkt_residual=orc.kkt_residual,
        solver_sweeps=rep.sweeps,
    )
