"""Closed-form entropic VQR between Gaussian marginals.

Reference measure ``U ~ N(0, I_{d_y})`` and data ``(X, Y) ~ N((0, m_Y), Sigma)``.
The optimal coupling is ``N(m, Gamma_eps)`` on ``w = (u, x, y)`` with

    Gamma_eps = [[I,    0,      Lam ],
                 [0,    S_xx,   S_xy],
                 [Lam,  S_yx,   S_yy]]

where ``Lam`` solves ``Lam^2 + eps Lam = S_yy - S_yx S_xx^{-1} S_xy``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NotPSD, SingularMatrix


@dataclass(frozen=True)
class GaussianModel:
    m_y: np.ndarray
    sigma_xx: np.ndarray
    sigma_xy: np.ndarray
    sigma_yy: np.ndarray

    def __post_init__(self):
        m_y = np.atleast_1d(np.asarray(self.m_y, dtype=float))
        sxx = linalg.as_sym(self.sigma_xx)
        syy = linalg.as_sym(self.sigma_yy)
        sxy = np.asarray(self.sigma_xy, dtype=float).reshape(sxx.shape[0], syy.shape[0])
        if m_y.shape != (syy.shape[0],):
            raise DimensionMismatch(f"m_y has shape {m_y.shape}, expected ({syy.shape[0]},)")
        for name, val in (("m_y", m_y), ("sigma_xx", sxx), ("sigma_xy", sxy), ("sigma_yy", syy)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        try:
            np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as exc:
            raise NotPSD("joint covariance of (X, Y) is not positive definite") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianModel":
        return cls(
            m_y=d["m_y"], sigma_xx=d["sigma_xx"], sigma_xy=d["sigma_xy"], sigma_yy=d["sigma_yy"]
        )

    @classmethod
    def from_json(cls, path) -> "GaussianModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "m_y": self.m_y.tolist(),
            "sigma_xx": self.sigma_xx.tolist(),
            "sigma_xy": self.sigma_xy.tolist(),
            "sigma_yy": self.sigma_yy.tolist(),
        }

    @property
    def d_x(self) -> int:
        return self.sigma_xx.shape[0]

    @property
    def d_y(self) -> int:
        return self.sigma_yy.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return np.block([[self.sigma_xx, self.sigma_xy], [self.sigma_xy.T, self.sigma_yy]])

    @property
    def slope(self) -> np.ndarray:
        """``G = -S_xx^{-1} S_xy``, the g-potential matrix."""
        return -linalg.sym_solve(self.sigma_xx, self.sigma_xy)

    def schur_yy(self) -> np.ndarray:
        """Conditional covariance ``S_yy - S_yx S_xx^{-1} S_xy`` (the inverse of Omega_yy)."""
        s = self.sigma_yy + self.sigma_xy.T @ self.slope
        return 0.5 * (s + s.T)

    def omega_yy(self) -> np.ndarray:
        s = self.schur_yy()
        o = linalg.sym_solve(s, np.eye(self.d_y))
        return 0.5 * (o + o.T)


@dataclass(frozen=True)
class GaussianCoupling:
    mean: np.ndarray
    gamma: np.ndarray
    lam: np.ndarray
    d_x: int
    d_y: int

    def blocks(self):
        """Index slices for the u, x and y blocks of ``w``."""
        dy, dx = self.d_y, self.d_x
        return slice(0, dy), slice(dy, dy + dx), slice(dy + dx, 2 * dy + dx)


def lambda_eps(model: GaussianModel, epsilon: float) -> np.ndarray:
    """``(S + eps^2/4 I)^{1/2} - eps/2 I`` with ``S`` the conditional covariance of Y given X.

    Evaluated eigenvalue-wise as ``s / (sqrt(s + eps^2/4) + eps/2)``, which is the
    same number without the cancellation at large ``eps``. ``epsilon = 0``
    gives the unregularized limit ``S^{1/2}``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    s = model.schur_yy()
    w, v = np.linalg.eigh(s)
    top = float(np.abs(w).max())
    if w[0] < -linalg.NEG_EIG_TOL * top:
        raise NotPSD("conditional covariance of Y given X is not PSD")
    w = np.clip(w, 0.0, None)
    lam = w / (np.sqrt(w + 0.25 * epsilon**2) + 0.5 * epsilon)
    out = (v * lam) @ v.T
    return 0.5 * (out + out.T)


def _assemble(model: GaussianModel, lam: np.ndarray) -> GaussianCoupling:
    dx, dy = model.d_x, model.d_y
    gamma = np.zeros((2 * dy + dx, 2 * dy + dx))
    gamma[:dy, :dy] = np.eye(dy)
    gamma[:dy, dy + dx:] = lam
    gamma[dy + dx:, :dy] = lam.T
    gamma[dy:, dy:] = model.sigma
    mean = np.concatenate([np.zeros(dy + dx), model.m_y])
    return GaussianCoupling(mean=mean, gamma=0.5 * (gamma + gamma.T), lam=lam, d_x=dx, d_y=dy)


def optimal_gaussian_coupling(model: GaussianModel, epsilon: float) -> GaussianCoupling:
    if epsilon <= 0:
        raise ValueError("the regularized coupling needs epsilon > 0; use limit_coupling for 0")
    cpl = _assemble(model, lambda_eps(model, epsilon))
    try:
        np.linalg.cholesky(cpl.gamma)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("assembled coupling covariance is not positive definite") from exc
    return cpl


def limit_coupling(model: GaussianModel) -> GaussianCoupling:
    """The epsilon -> 0 coupling; its covariance has rank ``d_x + d_y``."""
    return _assemble(model, lambda_eps(model, 0.0))


def riccati_residual(model: GaussianModel, lam: np.ndarray, epsilon: float) -> float:
    """Frobenius norm of ``Lam Omega Lam^T + eps Lam Omega - I``."""
    lam = np.atleast_2d(np.asarray(lam, dtype=float))
    om = model.omega_yy()
    r = lam @ om @ lam.T + epsilon * lam @ om - np.eye(model.d_y)
    return float(np.linalg.norm(r))


def precision_blocks(coupling: GaussianCoupling, epsilon: float) -> tuple[float, float, float]:
    """Relative Frobenius deviations of three precision blocks from their closed forms.

    Inverts ``Gamma_eps`` numerically and compares
    ``Theta_UY`` with ``-I/eps``, ``Theta_UU`` with ``Lam/eps + I`` and
    ``Theta_XU`` with ``S_xx^{-1} S_xy / eps``. Returns ``(uy, uu, xu)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    su, sx, sy = coupling.blocks()
    theta = linalg.sym_solve(coupling.gamma, np.eye(coupling.gamma.shape[0]))
    dy = coupling.d_y
    sxx = coupling.gamma[sx, sx]
    sxy = coupling.gamma[sx, sy]
    expected = {
        "uy": -np.eye(dy) / epsilon,
        "uu": coupling.lam / epsilon + np.eye(dy),
        "xu": linalg.sym_solve(sxx, sxy) / epsilon if coupling.d_x else np.zeros((0, dy)),
    }
    got = {"uy": theta[su, sy], "uu": theta[su, su], "xu": theta[sx, su]}

    def rel(key):
        ref = expected[key]
        return float(np.linalg.norm(got[key] - ref) / max(np.linalg.norm(ref), 1.0 / epsilon))

    return rel("uy"), rel("uu"), rel("xu")


@dataclass(frozen=True)
class GaussianPotentials:
    """Quadratic dual potentials of the Gaussian problem.

    ``f(u) = -u^T (Lam - I) u / 2 - m_y^T u - f_const``, ``g(u) = G u`` and
    ``h(x, y) = -r^T Psi r / 2 + |y|^2 / 2`` with ``r = G^T x + y - m_y``.
    """

    f_matrix: np.ndarray
    f_linear: np.ndarray
    f_constant: float
    g_matrix: np.ndarray
    psi: np.ndarray
    h_shift: np.ndarray
    epsilon: float

    def f(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(-0.5 * u @ self.f_matrix @ u - self.f_linear @ u - self.f_constant)

    def g(self, u) -> np.ndarray:
        return self.g_matrix @ np.asarray(u, dtype=float)

    def h(self, x, y) -> float:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        r = self.g_matrix.T @ x + y - self.h_shift
        return float(-0.5 * r @ self.psi @ r + 0.5 * y @ y)

    def to_dict(self) -> dict:
        return {
            "f_matrix": self.f_matrix.tolist(),
            "f_linear": self.f_linear.tolist(),
            "f_constant": self.f_constant,
            "g_matrix": self.g_matrix.tolist(),
            "psi": self.psi.tolist(),
            "h_shift": self.h_shift.tolist(),
        }


def log_det_eps_lambda_omega(model: GaussianModel, epsilon: float, lam=None) -> float:
    lam = lambda_eps(model, epsilon) if lam is None else lam
    return linalg.cholesky_logdet(epsilon * lam @ model.omega_yy())


def gaussian_dual_potentials(model: GaussianModel, epsilon: float) -> GaussianPotentials:
    if epsilon <= 0:
        raise ValueError("dual potentials need epsilon > 0")
    lam = lambda_eps(model, epsilon)
    psi = lam @ model.omega_yy()
    psi = 0.5 * (psi + psi.T)
    dy = model.d_y
    return GaussianPotentials(
        f_matrix=lam - np.eye(dy),
        f_linear=model.m_y.copy(),
        f_constant=0.5 * epsilon * log_det_eps_lambda_omega(model, epsilon, lam),
        g_matrix=model.slope,
        psi=psi,
        h_shift=model.m_y.copy(),
        epsilon=float(epsilon),
    )


def delta_theta(model: GaussianModel, epsilon: float) -> np.ndarray:
    """Closed form of ``Gamma_eps^{-1} - blockdiag(I, Sigma^{-1})`` on ``w = (u, x, y)``.

    ``(1/eps) [[Lam, -G^T, -I], [-G, G Psi G^T, G Psi], [-I, Psi G^T, Psi]]``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lam = lambda_eps(model, epsilon)
    psi = lam @ model.omega_yy()
    psi = 0.5 * (psi + psi.T)
    g = model.slope
    dy = model.d_y
    eye = np.eye(dy)
    out = np.block([
        [lam, -g.T, -eye],
        [-g, g @ psi @ g.T, g @ psi],
        [-eye, psi @ g.T, psi],
    ]) / epsilon
    return 0.5 * (out + out.T)


def log_density_identity_residual(model: GaussianModel, epsilon: float, sample_points) -> float:
    """Max gap between the potential-based and precision-based log densities.

    Left side: ``(f(u) + <g(u), x> + h(x, y) - |u - y|^2 / 2) / eps`` from the
    closed-form potentials. Right side: ``-(w - m)^T dTheta (w - m) / 2`` minus
    half of ``log det Gamma_eps - log det Sigma``, the latter taken from
    Cholesky factors of the covariances rather than from the potentials.
    """
    pots = gaussian_dual_potentials(model, epsilon)
    cpl = optimal_gaussian_coupling(model, epsilon)
    su, sx, sy = cpl.blocks()
    dtheta = delta_theta(model, epsilon)
    const = linalg.cholesky_logdet(cpl.gamma) - linalg.cholesky_logdet(model.sigma)
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    worst = 0.0
    for w in pts:
        u, x, y = w[su], w[sx], w[sy]
        lhs = (pots.f(u) + pots.g(u) @ x + pots.h(x, y) - 0.5 * np.sum((u - y) ** 2)) / epsilon
        r = w - cpl.mean
        rhs = -0.5 * r @ dtheta @ r - 0.5 * const
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def delta_theta_numeric_gap(model: GaussianModel, epsilon: float) -> float:
    """Relative Frobenius gap between :func:`delta_theta` and a numerical inverse."""
    cpl = optimal_gaussian_coupling(model, epsilon)
    su, sx, _ = cpl.blocks()
    n = cpl.gamma.shape[0]
    theta0 = np.zeros((n, n))
    theta0[su, su] = np.eye(model.d_y)
    theta0[sx.start:, sx.start:] = linalg.sym_solve(model.sigma, np.eye(model.d_x + model.d_y))
    numeric = linalg.sym_solve(cpl.gamma, np.eye(n)) - theta0
    closed = delta_theta(model, epsilon)
    return float(np.linalg.norm(numeric - closed) / np.linalg.norm(closed))


def conditional_y_covariance(coupling: GaussianCoupling) -> np.ndarray:
    """Covariance of Y given (U, X) under the coupling, by block Schur complement."""
    su, sx, sy = coupling.blocks()
    g = coupling.gamma
    k = np.r_[np.arange(su.start, su.stop), np.arange(sx.start, sx.stop)]
    gkk = g[np.ix_(k, k)]
    gky = g[k, sy]
    c = g[sy, sy] - gky.T @ linalg.sym_solve(gkk, gky)
    return 0.5 * (c + c.T)


def limit_regression(model: GaussianModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients of ``Y = m_y + Lam_o U + B X`` holding a.s. in the limit coupling.

    Returns ``(m_y, Lam_o, B)`` with ``B = S_yx S_xx^{-1}``.
    """
    return model.m_y, lambda_eps(model, 0.0), -model.slope.T


def sample_limit_coupling(model: GaussianModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``(U, X, Y)`` rows by pushing independent ``U``, ``X`` through the limit regression."""
    m_y, lam_o, slope = limit_regression(model)
    u = rng.standard_normal((size, model.d_y))
    x = rng.standard_normal((size, model.d_x)) @ np.linalg.cholesky(model.sigma_xx).T
    y = m_y + u @ lam_o.T + x @ slope.T
    return np.hstack([u, x, y])


def _first_order_l(model: GaussianModel) -> np.ndarray:
    lam_o = lambda_eps(model, 0.0)
    q = linalg.sym_solve(model.sigma_xx, model.sigma_xy)
    return np.eye(model.d_y) + lam_o @ lam_o + q.T @ q


def w2_first_order(model: GaussianModel) -> float:
    """Coefficient ``tr(L^{-1} Lam_o)`` of the linear term in ``W_2^2(pi_eps, pi_o)``.

    ``L = I + Lam_o^2 + S_yx S_xx^{-2} S_xy``.
    """
    lam_o = lambda_eps(model, 0.0)
    return float(np.trace(linalg.sym_solve(_first_order_l(model), lam_o)))


def subspace_distance(model: GaussianModel, r) -> float:
    """``sqrt(r^T L^{-1} r)``: distance from ``(0, 0, r)`` to the support of the limit coupling."""
    r = np.asarray(r, dtype=float)
    return float(np.sqrt(r @ linalg.sym_solve(_first_order_l(model), r)))


def w2_exact(model: GaussianModel, epsilon: float) -> float:
    """``W_2^2`` between the regularized and limit couplings (same mean) via Bures."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    g_o = limit_coupling(model).gamma
    if epsilon == 0:
        return 0.0
    return linalg.bures_w2_squared(optimal_gaussian_coupling(model, epsilon).gamma, g_o)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    w2_exact: float
    first_order: float
    ratio: float
    residual_over_eps2: float


def sweep_epsilon(model: GaussianModel, eps_grid: Sequence[float]) -> list[SweepRow]:
    """Compare exact ``W_2^2`` with its first-order term along a grid, in input order."""
    coef = w2_first_order(model)
    rows = []
    for eps in eps_grid:
        eps = float(eps)
        if eps <= 0:
            raise ValueError("grid values must be positive")
        w2 = w2_exact(model, eps)
        first = eps * coef
        rows.append(SweepRow(eps, w2, first, w2 / first if first else float("nan"), (w2 - first) / eps**2))
    return rows


def random_model(rng: np.random.Generator, d_x: int, d_y: int, cond: float = 10.0) -> GaussianModel:
    """A random Gaussian model with joint covariance condition number about ``cond``."""
    d = d_x + d_y
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), size=d))
    sigma = (q * eig) @ q.T
    sigma = 0.5 * (sigma + sigma.T)
    return GaussianModel(
        m_y=rng.standard_normal(d_y),
        sigma_xx=sigma[:d_x, :d_x],
        sigma_xy=sigma[:d_x, d_x:],
        sigma_yy=sigma[d_x:, d_x:],
    )

