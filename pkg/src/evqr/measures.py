"""Discrete marginals, the quadratic cost, and feasibility checks.

The reference measure ``mu`` lives on u-space (dimension ``d_y``). The data
measure ``nu`` lives on (x, y)-space with the covariate block first, so a row
of ``nu.points`` is ``(x_1, ..., x_{d_x}, y_1, ..., y_{d_y})``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12
RANK_TOL_FACTOR = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted atoms. Zero-weight atoms are dropped on construction."""

    weights: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] != w.shape[0]:
            raise DimensionMismatch(
                f"weights have length {w.shape[0]} but points have shape {pts.shape}"
            )
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if not np.all(np.isfinite(pts)):
            raise ValueError("atom coordinates must be finite")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1")
        keep = w > 0
        if not np.all(keep):
            logger.info("dropping %d zero-weight atoms", int((~keep).sum()))
            w, pts = w[keep], pts[keep]
        if w.size == 0:
            raise ValueError("measure has no atoms")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    """Quadratic cost ``c(u_i, y_j) = |u_i - y_j|^2 / 2`` between u-atoms and y-blocks.

    ``nu`` may be passed either as a full (x, y) measure or as a pure y measure;
    the trailing ``mu.dim`` columns are used as y.
    """
    d = mu.dim
    if nu.dim < d:
        raise DimensionMismatch(f"u has dimension {d} but nu atoms have {nu.dim} columns")
    return _sq_cost(mu.points, nu.points[:, nu.dim - d:])


def _sq_cost(u: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = u[:, None, :] - y[None, :, :]
    return 0.5 * np.einsum("ijk,ijk->ij", diff, diff)


def center_covariates(nu: DiscreteMeasure, d_x: int) -> tuple[DiscreteMeasure, np.ndarray]:
    """Subtract the weighted mean of the first ``d_x`` columns.

    Returns the centered measure and the subtracted shift.
    """
    if not 0 <= d_x <= nu.dim:
        raise DimensionMismatch(f"d_x={d_x} out of range for {nu.dim}-dimensional atoms")
    shift = nu.weights @ nu.points[:, :d_x]
    pts = np.array(nu.points)
    pts[:, :d_x] -= shift
    return DiscreteMeasure(nu.weights, pts), shift


@dataclass(frozen=True)
class Problem:
    """A discrete entropic VQR instance with covariates centered on construction.

    ``centering_shift`` accumulates the covariate mean removed from ``nu``.
    """

    mu: DiscreteMeasure
    nu: DiscreteMeasure
    epsilon: float
    centering_shift: np.ndarray = field(default=None)

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        d_x = self.nu.dim - self.mu.dim
        if d_x < 0:
            raise DimensionMismatch(
                f"nu atoms have {self.nu.dim} columns, fewer than dim(u)={self.mu.dim}"
            )
        nu, shift = center_covariates(self.nu, d_x)
        prior = np.zeros(d_x) if self.centering_shift is None else np.asarray(self.centering_shift, float)
        if prior.shape != (d_x,):
            raise DimensionMismatch(f"centering_shift must have length {d_x}")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "centering_shift", _frozen(prior + shift))
        object.__setattr__(self, "_cost", _frozen(cost_matrix(self.mu, nu)))

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def m(self) -> int:
        return self.nu.size

    @property
    def d_y(self) -> int:
        return self.mu.dim

    @property
    def d_x(self) -> int:
        return self.nu.dim - self.mu.dim

    @property
    def a(self) -> np.ndarray:
        return self.mu.weights

    @property
    def b(self) -> np.ndarray:
        return self.nu.weights

    @property
    def u(self) -> np.ndarray:
        return self.mu.points

    @property
    def x(self) -> np.ndarray:
        return self.nu.points[:, : self.d_x]

    @property
    def y(self) -> np.ndarray:
        return self.nu.points[:, self.d_x:]

    @property
    def cost(self) -> np.ndarray:
        return self._cost


@dataclass(frozen=True)
class ValidationReport:
    x_mean_norm: float
    x_second_moment_min_eig: float
    feasible: bool
    messages: list[str]

    def to_dict(self) -> dict:
        return {
            "x_mean_norm": self.x_mean_norm,
            "x_second_moment_min_eig": self.x_second_moment_min_eig,
            "feasible": self.feasible,
            "messages": list(self.messages),
        }


def validate_problem(p: Problem) -> ValidationReport:
    """Check that the weighted covariate second moment is nonsingular.

    With the covariates centered, an invertible second moment places 0 in the
    interior of the convex hull of the x-atoms, which is what every per-row
    g-solve needs.
    """
    x, b = p.x, p.b
    messages = []
    if p.d_x == 0:
        return ValidationReport(0.0, float("inf"), True, ["no covariates"])
    mean_norm = float(np.linalg.norm(b @ x))
    second = (x * b[:, None]).T @ x
    second = 0.5 * (second + second.T)
    eigs = np.linalg.eigvalsh(second)
    min_eig = float(eigs[0])
    rank_tol = RANK_TOL_FACTOR * float(np.trace(second)) / p.d_x
    feasible = bool(min_eig > rank_tol)
    if not feasible:
        messages.append(
            f"covariate second moment is singular (min eigenvalue {min_eig:.3e} <= {rank_tol:.3e}); "
            "covariates concentrate on a hyperplane, so 0 is not interior to their convex hull"
        )
    return ValidationReport(mean_norm, min_eig, feasible, messages)
