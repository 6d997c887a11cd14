"""Synthetic quadratics with explicit spectra and per-component diagnostics.

A clustered operator is diag(lam_0, ..., lam_n) with lam_0 = shift and
lam_i = shift + d_i for a strictly decreasing positive sequence d_i -> 0,
i.e. the finite truncation of a compact positive perturbation of a positive
shift. In these diagonal coordinates the gradient of the quadratic splits
into scalar components g_i that obey the one-step recurrence

    g_i^{k+1} = (1 - lam_i / alpha_k) * g_i^k,

which makes the convergence mechanics of the BB iteration directly
observable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bb import GradientProblem, InitC1
from .errors import DimensionMismatchError, InsufficientDataError
from .linalg import WeightedSpace

#: Relative drop of the gradient norm a trace must reach before a half-life
#: estimate is considered meaningful.
HALF_LIFE_DEPTH = 1e-12


@dataclass(frozen=True)
class SpectralOperator:
    """Finite list of eigenvalues; index 0 holds the cluster shift."""

    eigenvalues: np.ndarray
    shift: float

    def __post_init__(self):
        lams = np.asarray(self.eigenvalues, dtype=float)
        if lams.ndim != 1 or lams.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-D array")
        if np.any(lams <= 0.0):
            raise ValueError("all eigenvalues must be strictly positive")
        object.__setattr__(self, "eigenvalues", lams)

    @property
    def lam_min(self):
        return float(self.eigenvalues.min())

    @property
    def lam_max(self):
        return float(self.eigenvalues.max())


@dataclass(frozen=True)
class RateConstants:
    """Condition number and the two contraction factors derived from it."""

    kappa: float
    gamma: float  # (lam_max - lam_min) / lam_min == kappa - 1
    rho: float  # (lam_max - lam_min) / lam_max == 1 - 1/kappa


@dataclass(frozen=True)
class ClusteredProblem:
    """Operator + quadratic problem + canonical initialization.

    The minimizer has all-ones coordinates; ``g1`` is the spectral mass of
    the gradient at the first iterate of ``init``.
    """

    operator: SpectralOperator
    problem: GradientProblem
    init: InitC1
    g1: np.ndarray


@dataclass(frozen=True)
class ComponentTrace:
    """Per-iteration magnitudes |g_i^k|, rows k = 1..K, columns i = 0..n."""

    magnitudes: np.ndarray

    def norms(self):
        return np.sqrt((self.magnitudes**2).sum(axis=1))


def make_clustered_problem(shift, n, decay="geometric", rate=0.5, g1=None, seed=None):
    """Build a clustered-spectrum quadratic with n+1 eigenvalues.

    decay="geometric" uses d_i = rate**(i-1) with rate in (0, 1);
    decay="algebraic" uses d_i = 1 / i**rate with rate > 0. The leading
    perturbation d_1 is normalized to 1, so kappa = (shift + 1) / shift.

    ``g1`` fixes the spectral mass of the gradient at the first iterate
    (all-ones by default; a seed draws positive values instead).
    """
    if not shift > 0.0:
        raise ValueError("shift must be positive")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n >= 1:
        if decay == "geometric":
            if not 0.0 < rate < 1.0:
                raise ValueError("geometric decay requires rate in (0, 1)")
            d = rate ** np.arange(n, dtype=float)
        elif decay == "algebraic":
            if not rate > 0.0:
                raise ValueError("algebraic decay requires a positive power")
            d = 1.0 / np.arange(1, n + 1, dtype=float) ** rate
        else:
            raise ValueError(f"unknown decay kind: {decay!r}")
        eigenvalues = np.concatenate(([shift], shift + d))
    else:
        eigenvalues = np.array([shift])
    operator = SpectralOperator(eigenvalues, shift)

    if g1 is None:
        if seed is None:
            g1 = np.ones(n + 1)
        else:
            g1 = np.random.default_rng(seed).uniform(0.5, 1.5, n + 1)
    else:
        g1 = np.asarray(g1, dtype=float)
        if g1.shape != (n + 1,):
            raise DimensionMismatchError("g1 must have one entry per eigenvalue")

    u_star = np.ones(n + 1)
    b = eigenvalues * u_star

    def gradient(u):
        return eigenvalues * u - b

    def objective(u):
        return float(0.5 * u @ (eigenvalues * u) - b @ u)

    problem = GradientProblem(
        space=WeightedSpace(sp.identity(n + 1, format="csr")),
        gradient=gradient,
        dimension=n + 1,
        objective=objective,
    )
    # First iterate realizing the requested spectral mass: G(u1) = g1.
    u1 = u_star + g1 / eigenvalues
    init = InitC1(u0=np.zeros(n + 1), u1=u1)
    return ClusteredProblem(operator, problem, init, g1)


def component_trace(operator, trace):
    """Reconstruct the spectral components g_i^k from a recorded run.

    The run must come from the quadratic of ``make_clustered_problem`` for
    this operator (all-ones minimizer), so the initial components follow
    from the stored first iterate.
    """
    lams = operator.eigenvalues
    u1 = np.asarray(trace.first_iterate, dtype=float)
    if u1.shape != lams.shape:
        raise DimensionMismatchError(
            f"trace dimension {u1.shape} does not match operator {lams.shape}"
        )
    g = lams * u1 - lams  # gradient coordinates at the first iterate
    out = [np.abs(g)]
    for record in trace.records[:-1]:
        g = (1.0 - lams / record.alpha) * g
        out.append(np.abs(g))
    return ComponentTrace(np.array(out))


def rate_constants(operator):
    lam_min, lam_max = operator.lam_min, operator.lam_max
    kappa = lam_max / lam_min
    return RateConstants(
        kappa=kappa,
        gamma=(lam_max - lam_min) / lam_min,
        rho=(lam_max - lam_min) / lam_max,
    )


def half_life_bound(operator):
    """Iteration bound ceil(-log 2 / log gamma), valid when kappa < 2."""
    constants = rate_constants(operator)
    if constants.kappa >= 2.0 or constants.gamma <= 0.0:
        return None
    return int(np.ceil(-np.log(2.0) / np.log(constants.gamma)))


def empirical_half_life(operator, trace):
    """Smallest m with ||G_{k+m}|| <= ||G_k|| / 2 for every recorded k."""
    del operator  # part of the call contract; the scan uses only the trace
    norms = trace.grad_norms()
    if norms.size < 2 or norms.min() > HALF_LIFE_DEPTH * norms[0]:
        raise InsufficientDataError(
            "trace has not decayed far enough for a half-life estimate"
        )
    for m in range(1, norms.size):
        if np.all(norms[m:] <= 0.5 * norms[:-m]):
            return m
    raise InsufficientDataError("no uniform half-life within the recorded trace")
