"""Barzilai-Borwein gradient iteration over weighted inner-product spaces.

The engine is generic over any problem exposing a gradient map and the
weighted space carrying the inner product. Step sizes are the two classic
quotients built from the last displacement S = u_k - u_{k-1} and gradient
change Y = G_k - G_{k-1}:

    BB1 = (S, Y)_W / (S, S)_W        BB2 = (Y, Y)_W / (S, Y)_W

ABB alternates: BB1 at odd iterations, BB2 at even ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateStepError, DimensionMismatchError, NonconvexStepError
from .linalg import WeightedSpace, wdot, wnorm

DEFAULT_MAX_ITER = 10_000

REASON_CONVERGED = "converged"
REASON_MAX_ITER = "max_iter"


class StepRule(enum.Enum):
    BB1 = "BB1"
    BB2 = "BB2"
    ABB = "ABB"


@dataclass(frozen=True)
class GradientProblem:
    """Contract every back-end satisfies: a gradient map over a weighted space.

    ``gradient`` must be deterministic (bit-identical output for identical
    input) and safe for concurrent read-only use.
    """

    space: WeightedSpace
    gradient: Callable[[np.ndarray], np.ndarray]
    dimension: int
    objective: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class InitC1:
    """Two initial iterates u0 != u1."""

    u0: np.ndarray
    u1: np.ndarray


@dataclass(frozen=True)
class InitC2:
    """One initial iterate plus an explicit first step size alpha1 > 0."""

    u1: np.ndarray
    alpha1: float


@dataclass(frozen=True)
class DefaultInit:
    """u0 = 0 with unit initial step, hence u1 = -G(0)."""


@dataclass(frozen=True)
class Safeguard:
    """Optional clamp [alpha_min, alpha_max] enabling nonconvex fallbacks."""

    alpha_min: float
    alpha_max: float

    def __post_init__(self):
        if not self.alpha_min < self.alpha_max:
            raise ValueError("safeguard requires alpha_min < alpha_max")


@dataclass(frozen=True)
class BBConfig:
    rule: StepRule
    eps: float
    max_iter: int = DEFAULT_MAX_ITER
    init: object = field(default_factory=DefaultInit)
    safeguard: Optional[Safeguard] = None
    record_objective: bool = False
    record_iterates: bool = False

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("eps must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class IterationRecord:
    """One row of a run trace.

    ``alpha`` is the step size applied to leave iterate k; it is NaN on the
    terminating record, where no step is taken.
    """

    k: int
    grad_norm: float
    alpha: float
    objective: Optional[float] = None


@dataclass
class BBTrace:
    records: list[IterationRecord]
    first_iterate: np.ndarray
    final_iterate: np.ndarray
    reason: str
    iterates: Optional[list[np.ndarray]] = None

    def ks(self):
        return np.array([r.k for r in self.records], dtype=int)

    def grad_norms(self):
        return np.array([r.grad_norm for r in self.records])

    def alphas(self):
        return np.array([r.alpha for r in self.records])


def rule_at(k, rule):
    """Concrete quotient used at iteration k (resolves the alternating rule)."""
    if rule is StepRule.ABB:
        return StepRule.BB1 if k % 2 == 1 else StepRule.BB2
    return rule


def bb_step(S, Y, space, rule, safeguard=None):
    """Step size from displacement S and gradient change Y.

    With a safeguard configured, nonpositive curvature falls back to
    alpha_max and the computed quotient is clamped into
    [alpha_min, alpha_max]; without one, nonpositive curvature raises.
    """
    if rule not in (StepRule.BB1, StepRule.BB2):
        raise ValueError("bb_step expects BB1 or BB2; resolve ABB via rule_at first")
    ss = wdot(space, S, S)
    if ss == 0.0:
        raise DegenerateStepError("zero displacement between iterates")
    sy = wdot(space, S, Y)
    if sy <= 0.0:
        if safeguard is None:
            raise NonconvexStepError(f"nonpositive curvature (S, Y)_W = {sy:.3e}")
        return safeguard.alpha_max
    if rule is StepRule.BB1:
        alpha = sy / ss
    else:
        alpha = wdot(space, Y, Y) / sy
    if safeguard is not None:
        alpha = min(max(alpha, safeguard.alpha_min), safeguard.alpha_max)
    return alpha


def _resolve_init(problem, init):
    """Return (u_prev, g_prev, u1, first_alpha)."""
    dim = problem.dimension
    if isinstance(init, DefaultInit):
        u_prev = np.zeros(dim)
        g_prev = np.asarray(problem.gradient(u_prev), dtype=float)
        return u_prev, g_prev, u_prev - g_prev, None
    if isinstance(init, InitC1):
        u0 = np.asarray(init.u0, dtype=float)
        u1 = np.asarray(init.u1, dtype=float)
        if u0.shape != (dim,) or u1.shape != (dim,):
            raise DimensionMismatchError("init iterates do not match the problem dimension")
        if np.array_equal(u0, u1):
            raise ValueError("C1 initialization requires u0 != u1")
        return u0.copy(), np.asarray(problem.gradient(u0), dtype=float), u1.copy(), None
    if isinstance(init, InitC2):
        u1 = np.asarray(init.u1, dtype=float)
        if u1.shape != (dim,):
            raise DimensionMismatchError("init iterate does not match the problem dimension")
        if not init.alpha1 > 0.0:
            raise ValueError("C2 initialization requires alpha1 > 0")
        return None, None, u1.copy(), float(init.alpha1)
    raise TypeError(f"unsupported init scheme: {init!r}")


def run(problem, config):
    """Execute the BB iteration until ||G_k||_W < eps or k = max_iter.

    The trace records every visited iteration index k >= 1, including the
    terminating one. An exactly zero gradient terminates as converged
    regardless of eps.
    """
    space = problem.space
    u_prev, g_prev, u, first_alpha = _resolve_init(problem, config.init)
    g = np.asarray(problem.gradient(u), dtype=float)
    first_iterate = u.copy()
    records = []
    iterates = [u.copy()] if config.record_iterates else None
    want_obj = config.record_objective and problem.objective is not None

    k = 1
    while True:
        grad_norm = wnorm(space, g)
        objective = float(problem.objective(u)) if want_obj else None
        if grad_norm == 0.0 or grad_norm < config.eps:
            records.append(IterationRecord(k, grad_norm, math.nan, objective))
            reason = REASON_CONVERGED
            break
        if k >= config.max_iter:
            records.append(IterationRecord(k, grad_norm, math.nan, objective))
            reason = REASON_MAX_ITER
            break

        if k == 1 and first_alpha is not None:
            alpha = first_alpha
        else:
            S = u - u_prev
            Y = g - g_prev
            try:
                alpha = bb_step(S, Y, space, rule_at(k, config.rule), config.safeguard)
            except (DegenerateStepError, NonconvexStepError) as exc:
                exc.k = k
                exc.args = (f"{exc.args[0]} (iteration k={k})",)
                raise

        records.append(IterationRecord(k, grad_norm, alpha, objective))
        u_prev, g_prev = u, g
        u = u - (1.0 / alpha) * g
        g = np.asarray(problem.gradient(u), dtype=float)
        if iterates is not None:
            iterates.append(u.copy())
        k += 1

    return BBTrace(records, first_iterate, u, reason, iterates)


def k_star(trace, eps):
    """Smallest recorded k with grad_norm < eps (strict); None if never."""
    for record in trace.records:
        if record.grad_norm < eps:
            return record.k
    return None
