"""Block-coordinate dual ascent for discrete entropic VQR.

Potentials ``(f, g, h)`` parameterize the coupling

    pi_ij = a_i b_j exp((f_i + <g_i, x_j> + h_j - c_ij) / eps)

and a sweep maximizes the dual exactly over ``(g_i, f_i)`` for every row
given ``h`` (a strictly convex exponential-family problem per row, solved by
damped Newton), then over ``h`` given ``(f, g)`` (a log-sum-exp). Every block
update is an exact maximization, so the dual value never decreases.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import ConstraintInfeasible, DomainError, NoConvergence, Overflow
from .measures import Problem, _sq_cost, validate_problem

logger = logging.getLogger(__name__)

LOG_OVERFLOW = 700.0
ARMIJO = 1e-4
MAX_HALVINGS = 60
MAX_LOGIT_STEP = 20.0
EPS_GUARD = 1e-6
COLLAPSE_TOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_sweeps: int = 10000
    inner_tol: float = 1e-12
    inner_max_iter: int = 50
    theta_max: float = 1e8
    ridge: float = 1e-12

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not val > 0:
                raise ValueError(f"{name} must be positive, got {val!r}")


@dataclass(frozen=True)
class Potentials:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        for name in ("f", "g", "h"):
            arr = np.array(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"potential {name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.g.ndim != 2 or self.g.shape[0] != self.f.shape[0]:
            raise ValueError(f"g must have shape (n, d_x), got {self.g.shape}")

    @classmethod
    def zeros(cls, p: Problem) -> "Potentials":
        return cls(np.zeros(p.n), np.zeros((p.n, p.d_x)), np.zeros(p.m))

    def sup_distance(self, other: "Potentials") -> float:
        return max(
            float(np.abs(self.f - other.f).max(initial=0.0)),
            float(np.abs(self.g - other.g).max(initial=0.0)),
            float(np.abs(self.h - other.h).max(initial=0.0)),
        )


@dataclass(frozen=True)
class Coupling:
    pi: np.ndarray

    def __post_init__(self):
        pi = np.array(self.pi, dtype=float)
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)


@dataclass
class SolveReport:
    sweeps: int
    primal_value: float
    dual_value: float
    duality_gap: float
    marginal_residual: float
    mean_indep_residual: float
    schrodinger_residual: float
    converged: bool

    def to_dict(self) -> dict:
        return asdict(self)


# --- log-domain kernels --------------------------------------------------------

def _log_kernel(p: Problem, pots: Potentials) -> np.ndarray:
    """``(f_i + <g_i, x_j> + h_j - c_ij) / eps``."""
    return (pots.f[:, None] + pots.g @ p.x.T + pots.h[None, :] - p.cost) / p.epsilon


def _log_coupling(p: Problem, pots: Potentials) -> np.ndarray:
    return np.log(p.a)[:, None] + np.log(p.b)[None, :] + _log_kernel(p, pots)


def update_h(p: Problem, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Exact dual maximizer over ``h`` given ``(f, g)``; makes column sums equal ``b``."""
    z = np.log(p.a)[:, None] + (f[:, None] + np.asarray(g) @ p.x.T - p.cost) / p.epsilon
    return -p.epsilon * logsumexp(z, axis=0)


def update_f(p: Problem, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Exact dual maximizer over ``f`` given ``(g, h)``; makes row sums equal ``a``."""
    z = np.log(p.b)[None, :] + (np.asarray(g) @ p.x.T + h[None, :] - p.cost) / p.epsilon
    return -p.epsilon * logsumexp(z, axis=1)


# --- per-row exponential-family solve ----------------------------------------

def _tilt_value(theta, x, logb, offset, eps):
    """Log-partition ``eps * logsumexp(log b + (<theta, x> + offset) / eps)`` and its softmax."""
    z = logb + (x @ theta + offset) / eps
    zmax = z.max()
    w = np.exp(z - zmax)
    s = w.sum()
    return eps * (zmax + np.log(s)), w / s


def tilt_log_partition(theta, x, logb, offset, eps):
    """Value, gradient and Hessian of the row log-partition at ``theta``.

    The gradient is the tilted mean of ``x`` and the Hessian is the tilted
    covariance divided by ``eps``.
    """
    val, prob = _tilt_value(theta, x, logb, offset, eps)
    mean = prob @ x
    xc = x - mean
    hess = (xc * prob[:, None]).T @ xc / eps
    return val, mean, hess


def _newton_tilt(x, logb, offset, eps, theta0, opts: SolverOptions, where: str) -> np.ndarray:
    d = x.shape[1]
    theta = np.array(theta0, dtype=float).reshape(d)
    if d == 0:
        return theta
    scale = max(float(np.sqrt((x * x).sum(axis=1)).max()), np.finfo(float).tiny)
    gtol = opts.inner_tol * scale
    val, grad, hess = tilt_log_partition(theta, x, logb, offset, eps)
    for _ in range(opts.inner_max_iter + 1):
        if np.linalg.norm(grad) <= gtol:
            return theta
        step = _newton_step(hess, grad, opts.ridge)
        if not np.all(np.isfinite(step)):
            step = -grad
        # a saturated softmax makes the Hessian nearly singular and the raw
        # Newton step useless; move along it by a capped, then doubled, length
        spread = np.abs((x - grad) @ step).max() / eps
        if spread > MAX_LOGIT_STEP:
            step = _expanding_step(theta, x, logb, offset, eps, step * (MAX_LOGIT_STEP / spread))
        slope = float(grad @ step)
        t = 1.0
        slack = 16 * np.finfo(float).eps * (abs(val) + eps)
        for _ in range(MAX_HALVINGS):
            trial = theta + t * step
            tval, _ = _tilt_value(trial, x, logb, offset, eps)
            if tval <= val + ARMIJO * t * slope + slack:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"{where}: line search failed (gradient norm {np.linalg.norm(grad):.3e})")
        theta = trial
        if not np.all(np.isfinite(theta)) or np.linalg.norm(theta) > opts.theta_max:
            raise ConstraintInfeasible(
                f"{where}: tilt parameter diverged (|theta| > {opts.theta_max:g}); "
                "0 is not in the interior of the convex hull of the covariate atoms"
            )
        val, grad, hess = tilt_log_partition(theta, x, logb, offset, eps)
    if np.trace(hess) * eps <= COLLAPSE_TOL * scale**2:
        raise ConstraintInfeasible(
            f"{where}: the tilted covariate law collapsed onto a face of the covariate hull "
            f"with mean norm {np.linalg.norm(grad):.3e}; 0 is not in the interior of the hull"
        )
    raise NoConvergence(
        f"{where}: Newton did not reach gradient norm {gtol:.3e} in {opts.inner_max_iter} iterations "
        f"(last {np.linalg.norm(grad):.3e})"
    )


def _expanding_step(theta, x, logb, offset, eps, step):
    """Double ``step`` while the log-partition keeps dropping.

    Past saturation the log-partition is nearly linear along the step until
    other atoms regain mass, so a fixed cap alone can take hundreds of
    iterations to get there.
    """
    best, _ = _tilt_value(theta + step, x, logb, offset, eps)
    for _ in range(MAX_HALVINGS):
        trial, _ = _tilt_value(theta + 2 * step, x, logb, offset, eps)
        if not trial < best:
            break
        step, best = 2 * step, trial
    return step


def _newton_step(hess, grad, ridge):
    d = hess.shape[0]
    try:
        c = np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        bump = ridge * max(float(np.trace(hess)) / d, np.finfo(float).tiny)
        try:
            c = np.linalg.cholesky(hess + bump * np.eye(d))
        except np.linalg.LinAlgError:
            return np.full(d, np.nan)
    return -np.linalg.solve(c.T, np.linalg.solve(c, grad))


def solve_g_row(p: Problem, row: int, h: np.ndarray, theta0=None, opts: Optional[SolverOptions] = None) -> np.ndarray:
    """Tilt ``g_i`` making the row's conditional covariate mean vanish, given ``h``."""
    opts = opts or SolverOptions()
    theta0 = np.zeros(p.d_x) if theta0 is None else theta0
    return _newton_tilt(p.x, np.log(p.b), h - p.cost[row], p.epsilon, theta0, opts, f"row {row}")


def row_log_partition(p: Problem, row: int, h: np.ndarray, theta) -> float:
    val, _ = _tilt_value(np.asarray(theta, float), p.x, np.log(p.b), h - p.cost[row], p.epsilon)
    return float(val)


# --- sweeps --------------------------------------------------------------------

def _rows_block(p: Problem, pots: Potentials, opts: SolverOptions, rows) -> list[tuple[np.ndarray, float]]:
    logb = np.log(p.b)
    out = []
    for i in rows:
        offset = pots.h - p.cost[i]
        theta = _newton_tilt(p.x, logb, offset, p.epsilon, pots.g[i], opts, f"row {i}")
        val, _ = _tilt_value(theta, p.x, logb, offset, p.epsilon)
        out.append((theta, -val))
    return out


def sweep(
    p: Problem,
    pots: Potentials,
    opts: Optional[SolverOptions] = None,
    executor: Optional[ThreadPoolExecutor] = None,
    on_block: Optional[Callable[[str, Potentials], None]] = None,
) -> Potentials:
    """One pass: ``(g_i, f_i)`` for every row against the same ``h``, then ``h``.

    Rows read a shared ``h`` snapshot and are merged in row order, so the
    result does not depend on whether ``executor`` is used.
    """
    opts = opts or SolverOptions()
    if executor is None:
        results = _rows_block(p, pots, opts, range(p.n))
    else:
        workers = max(getattr(executor, "_max_workers", 1), 1)
        chunks = [c for c in np.array_split(np.arange(p.n), workers) if c.size]
        results = [r for part in executor.map(lambda c: _rows_block(p, pots, opts, c), chunks) for r in part]
    g = np.array([r[0] for r in results]).reshape(p.n, p.d_x)
    f = np.array([r[1] for r in results])
    pots = Potentials(f, g, pots.h)
    if on_block is not None:
        on_block("fg", pots)
    pots = Potentials(f, g, update_h(p, f, g))
    if on_block is not None:
        on_block("h", pots)
    return pots


# --- values and diagnostics ----------------------------------------------------

def coupling_from_potentials(p: Problem, pots: Potentials) -> Coupling:
    logpi = _log_coupling(p, pots)
    top = float(logpi.max())
    if top > LOG_OVERFLOW:
        raise Overflow(f"log coupling entry {top:.1f} exceeds {LOG_OVERFLOW}; potentials are not normalized")
    return Coupling(np.exp(logpi))


def primal_value(p: Problem, pi, epsilon: Optional[float] = None) -> float:
    """``sum pi c + eps KL(pi | a x b)`` with ``0 log 0 = 0``."""
    pi = pi.pi if isinstance(pi, Coupling) else np.asarray(pi, dtype=float)
    eps = p.epsilon if epsilon is None else float(epsilon)
    ref = np.outer(p.a, p.b)
    pos = pi > 0
    if np.any(pos & (ref <= 0)):
        raise DomainError("coupling charges a pair with zero reference mass")
    transport = float((pi * p.cost).sum())
    if eps == 0:
        return transport
    kl = float((pi[pos] * np.log(pi[pos] / ref[pos])).sum())
    return transport + eps * kl


def dual_value(p: Problem, pots: Potentials) -> float:
    """``sum a f + sum b h - eps (sum_ij a_i b_j exp(kernel) - 1)``."""
    logpi = _log_coupling(p, pots)
    top = float(logpi.max())
    if top > LOG_OVERFLOW:
        raise Overflow(f"log coupling entry {top:.1f} exceeds {LOG_OVERFLOW}")
    mass = float(np.exp(logpi).sum())
    return float(p.a @ pots.f + p.b @ pots.h - p.epsilon * (mass - 1.0))


def duality_gap(p: Problem, pi, pots: Potentials) -> float:
    return primal_value(p, pi) - dual_value(p, pots)


def gauge_fix(p: Problem, pots: Potentials) -> Potentials:
    """Remove the affine gauge so that ``sum a_i f_i = 0`` and ``sum a_i g_i = 0``."""
    shift = float(p.a @ pots.f)
    v = p.a @ pots.g
    return Potentials(pots.f - shift, pots.g - v, pots.h + shift + p.x @ v)


def shift_gauge(p: Problem, pots: Potentials, a: float, v) -> Potentials:
    """Apply ``f + a, g + v, h - a - <v, x>``, which leaves the coupling unchanged."""
    v = np.asarray(v, dtype=float)
    return Potentials(pots.f + a, pots.g + v, pots.h - a - p.x @ v)


def marginal_residual(p: Problem, pi) -> float:
    pi = pi.pi if isinstance(pi, Coupling) else pi
    return max(float(np.abs(pi.sum(axis=1) - p.a).max()), float(np.abs(pi.sum(axis=0) - p.b).max()))


def mean_indep_residual(p: Problem, pi) -> float:
    pi = pi.pi if isinstance(pi, Coupling) else pi
    if p.d_x == 0:
        return 0.0
    return float(np.linalg.norm(pi @ p.x, axis=1).max())


def schrodinger_residual(p: Problem, pots: Potentials) -> float:
    """Sup-norm violation of the three fixed-point equations.

    ``f`` and ``h`` are compared with their log-sum-exp right-hand sides; the
    g-equation residual is the tilted covariate mean of each row.
    """
    rf = np.abs(pots.f - update_f(p, pots.g, pots.h)).max()
    rh = np.abs(pots.h - update_h(p, pots.f, pots.g)).max()
    rg = 0.0
    if p.d_x:
        logb = np.log(p.b)
        for i in range(p.n):
            _, prob = _tilt_value(pots.g[i], p.x, logb, pots.h - p.cost[i], p.epsilon)
            rg = max(rg, float(np.linalg.norm(prob @ p.x)))
    return float(max(rf, rh, rg))


def _report(p: Problem, pots: Potentials, cpl: Coupling, sweeps: int, converged: bool) -> SolveReport:
    primal = primal_value(p, cpl)
    dual = dual_value(p, pots)
    return SolveReport(
        sweeps=sweeps,
        primal_value=primal,
        dual_value=dual,
        duality_gap=primal - dual,
        marginal_residual=marginal_residual(p, cpl),
        mean_indep_residual=mean_indep_residual(p, cpl),
        schrodinger_residual=schrodinger_residual(p, pots),
        converged=converged,
    )


def _gap_settled(p: Problem, pots: Potentials, cpl: Coupling, tol: float) -> bool:
    # the coupling is only feasible to ~tol, so its primal value can undershoot
    # the dual; keep sweeping until that slack is an order below tol
    primal = primal_value(p, cpl)
    gap = primal - dual_value(p, pots)
    return abs(gap) <= max(0.05 * tol, 1e-13) * (1.0 + abs(primal))


def epsilon_is_small(p: Problem) -> bool:
    med = float(np.median(p.cost))
    return med > 0 and p.epsilon < EPS_GUARD * med


def solve(
    p: Problem,
    opts: Optional[SolverOptions] = None,
    init: Optional[Potentials] = None,
    threads: int = 1,
    callback: Optional[Callable[[int, Potentials], None]] = None,
) -> tuple[Coupling, Potentials, SolveReport]:
    """Iterate sweeps until potentials stall and the constraints hold to ``tol``.

    Stops when the sup-norm change of ``(f, g, h)`` over a sweep is below
    ``tol * (1 + eps)``, both the marginal and the mean-independence residuals
    are below ``tol``, and the primal-dual gap is within ``tol / 20``.

    Raises
    ------
    ConstraintInfeasible
        If the covariate second moment is singular or a row tilt diverges.
    NoConvergence
        After ``max_sweeps``; ``exc.report`` and ``exc.result`` hold the last state.
    """
    opts = opts or SolverOptions()
    if threads < 1:
        raise ValueError("threads must be >= 1")
    check = validate_problem(p)
    if not check.feasible:
        raise ConstraintInfeasible("; ".join(check.messages))
    if epsilon_is_small(p):
        warnings.warn(
            f"epsilon={p.epsilon:g} is below {EPS_GUARD:g} x median cost; expect very slow convergence",
            RuntimeWarning,
            stacklevel=2,
        )
    pots = init if init is not None else Potentials.zeros(p)
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    converged = False
    sweeps = 0
    try:
        while sweeps < opts.max_sweeps:
            new = sweep(p, pots, opts, executor=executor)
            sweeps += 1
            change = new.sup_distance(pots)
            pots = new
            if callback is not None:
                callback(sweeps, pots)
            if change < opts.tol * (1.0 + p.epsilon):
                cpl = coupling_from_potentials(p, pots)
                if (
                    marginal_residual(p, cpl) < opts.tol
                    and mean_indep_residual(p, cpl) < opts.tol
                    and _gap_settled(p, pots, cpl, opts.tol)
                ):
                    converged = True
                    break
    finally:
        if executor is not None:
            executor.shutdown()
    pots = gauge_fix(p, pots)
    cpl = coupling_from_potentials(p, pots)
    report = _report(p, pots, cpl, sweeps, converged)
    logger.debug("solve finished: %s", report)
    if not converged:
        exc = NoConvergence(f"no convergence after {sweeps} sweeps", report)
        exc.result = (cpl, pots, report)
        raise exc
    return cpl, pots, report


# --- off-atom extensions -------------------------------------------------------

def extend_h(p: Problem, pots: Potentials, x, y) -> float:
    x = np.asarray(x, dtype=float).reshape(p.d_x)
    c = _sq_cost(p.u, np.asarray(y, dtype=float).reshape(1, p.d_y))[:, 0]
    z = np.log(p.a) + (pots.f + pots.g @ x - c) / p.epsilon
    return float(-p.epsilon * logsumexp(z))


def extend_g(p: Problem, pots: Potentials, u, opts: Optional[SolverOptions] = None, theta0=None) -> np.ndarray:
    """Solve the mean-zero tilt equation at an arbitrary reference point ``u``."""
    opts = opts or SolverOptions()
    c = _sq_cost(np.asarray(u, dtype=float).reshape(1, p.d_y), p.y)[0]
    start = np.zeros(p.d_x) if theta0 is None else theta0
    return _newton_tilt(p.x, np.log(p.b), pots.h - c, p.epsilon, start, opts, "extend_g")


def extend_f(p: Problem, pots: Potentials, u, opts: Optional[SolverOptions] = None) -> float:
    c = _sq_cost(np.asarray(u, dtype=float).reshape(1, p.d_y), p.y)[0]
    theta = extend_g(p, pots, u, opts)
    val, _ = _tilt_value(theta, p.x, np.log(p.b), pots.h - c, p.epsilon)
    return float(-val)
