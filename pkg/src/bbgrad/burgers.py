"""Distributed control of 1-D viscous Burgers flow with homogeneous
Dirichlet ends.

State: y_t - nu*y_xx + y*y_x = B u + f on (0,1), advanced by implicit Euler
with a Newton solve per step. Controls are piecewise constant in time and
live on the mesh nodes strictly inside the control window; B extends them
by zero. The reduced gradient is the exact transpose of the converged
scheme, which is the package's only nonquadratic problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bb import GradientProblem
from .errors import NewtonFailureError
from .linalg import WeightedSpace, build_sparse

NEWTON_TOL = 1e-13
NEWTON_MAX = 30


@dataclass(frozen=True)
class BurgersConfig:
    viscosity: float
    alpha1: float
    alpha2: float
    beta: float
    level: int
    dt: float
    y0: Callable[[np.ndarray], np.ndarray]
    y_d: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    z_d: Optional[Callable[[np.ndarray], np.ndarray]] = None
    forcing: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    T: float = 1.0
    control_lo: float = 0.1
    control_hi: float = 0.4
    newton_tol: float = NEWTON_TOL
    newton_max: int = NEWTON_MAX

    def __post_init__(self):
        for name in ("viscosity", "alpha1", "alpha2", "beta", "dt", "T"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.control_lo < self.control_hi <= 1.0:
            raise ValueError("control window must satisfy 0 <= lo < hi <= 1")


def benchmark_config(beta, level, dt):
    """Gaussian bump initial state, zero targets and forcing."""
    return BurgersConfig(
        viscosity=0.01,
        alpha1=1.0,
        alpha2=1.0,
        beta=beta,
        level=level,
        dt=dt,
        y0=lambda x: 5.0 * np.exp(-20.0 * (x - 0.5) ** 2),
    )


def convection(y_full):
    """Galerkin convection vector c(y)_j = integral of y y_x phi_j and its
    Jacobian, both over all nodes (P1 elements, exact integrals)."""
    m = y_full.size - 1
    a = y_full[:-1]
    b = y_full[1:]
    diff = b - a
    left = diff * (a / 3.0 + b / 6.0)
    right = diff * (a / 6.0 + b / 3.0)
    c = np.zeros(m + 1)
    np.add.at(c, np.arange(m), left)
    np.add.at(c, np.arange(1, m + 1), right)

    dleft_da = -(a / 3.0 + b / 6.0) + diff / 3.0
    dleft_db = (a / 3.0 + b / 6.0) + diff / 6.0
    dright_da = -(a / 6.0 + b / 3.0) + diff / 6.0
    dright_db = (a / 6.0 + b / 3.0) + diff / 3.0
    elem = np.arange(m)
    rows = np.concatenate([elem, elem, elem + 1, elem + 1])
    cols = np.concatenate([elem, elem + 1, elem, elem + 1])
    vals = np.concatenate([dleft_da, dleft_db, dright_da, dright_db])
    jac = build_sparse(rows, cols, vals, (m + 1, m + 1))
    return c, jac


class BurgersAssembly:
    """1-D grid, matrices, data samples; beta-independent."""

    def __init__(self, config):
        self.config = config
        m = 2**config.level
        self.n_elems = m
        self.h = 1.0 / m
        self.x = np.linspace(0.0, 1.0, m + 1)
        self.x_int = self.x[1:-1]
        n = m - 1  # interior nodes

        self.n_steps = max(1, round(config.T / config.dt))
        self.dt = config.T / self.n_steps

        h = self.h
        self.M = sp.diags(
            [np.full(n - 1, h / 6.0), np.full(n, 2.0 * h / 3.0), np.full(n - 1, h / 6.0)],
            offsets=(-1, 0, 1),
        ).tocsr()
        self.K = sp.diags(
            [np.full(n - 1, -1.0 / h), np.full(n, 2.0 / h), np.full(n - 1, -1.0 / h)],
            offsets=(-1, 0, 1),
        ).tocsr()

        inside = (self.x_int > config.control_lo) & (self.x_int < config.control_hi)
        self.control_idx = np.flatnonzero(inside)
        self.control_mass = self.M[self.control_idx][:, self.control_idx].tocsr()
        self._control_mass_lu = spla.splu(self.control_mass.tocsc())

        self.y_init = np.asarray(config.y0(self.x_int), dtype=float)
        times = self.dt * np.arange(1, self.n_steps + 1)
        self.yd = np.array(
            [
                np.asarray(config.y_d(t, self.x_int), dtype=float)
                if config.y_d is not None
                else np.zeros(n)
                for t in times
            ]
        )
        self.zd = (
            np.asarray(config.z_d(self.x_int), dtype=float)
            if config.z_d is not None
            else np.zeros(n)
        )
        self.mass_forcing = np.array(
            [
                self.M @ np.asarray(config.forcing(t, self.x_int), dtype=float)
                if config.forcing is not None
                else np.zeros(n)
                for t in times
            ]
        )

    @property
    def n_interior(self):
        return self.M.shape[0]

    @property
    def n_control(self):
        return self.control_idx.size

    def control_shape(self):
        return (self.n_steps, self.n_control)

    def extend(self, u_ctrl):
        """Zero extension of control values onto all interior nodes."""
        full = np.zeros(self.n_interior)
        full[self.control_idx] = u_ctrl
        return full

    def pad(self, y_int):
        """Interior vector -> full nodal vector with boundary zeros."""
        return np.concatenate(([0.0], y_int, [0.0]))

    def control_space(self):
        gram = self.dt * sp.kron(sp.identity(self.n_steps), self.control_mass, format="csr")
        return WeightedSpace(gram)


def assemble(config):
    return BurgersAssembly(config)


def _as_control(asm, u):
    return np.asarray(u, dtype=float).reshape(asm.control_shape())


def _step_bands(asm, y_int):
    """Banded (tridiagonal) implicit-Euler Jacobian M/dt + nu*K + C(y) on
    interior nodes, as the (upper, main, lower) rows expected by
    scipy.linalg.solve_banded."""
    _, jac_full = convection(asm.pad(y_int))
    conv = jac_full[1:-1, 1:-1]
    base = asm.M / asm.dt + asm.config.viscosity * asm.K
    n = asm.n_interior
    bands = np.zeros((3, n))
    bands[0, 1:] = base.diagonal(1) + conv.diagonal(1)
    bands[1, :] = base.diagonal(0) + conv.diagonal(0)
    bands[2, :-1] = base.diagonal(-1) + conv.diagonal(-1)
    return bands


def _banded_solve(bands, rhs, transpose=False):
    if transpose:
        flipped = np.zeros_like(bands)
        flipped[0, 1:] = bands[2, :-1]
        flipped[1] = bands[1]
        flipped[2, :-1] = bands[0, 1:]
        bands = flipped
    return sla.solve_banded((1, 1), bands, rhs)


def solve_state(asm, u, collect_newton=False):
    """March the implicit-Euler scheme; Newton solves each step to
    ``newton_tol`` in the Euclidean residual norm.

    Returns Y of shape (N+1, n_interior); with ``collect_newton`` also a
    list of per-step residual-norm sequences.
    """
    cfg = asm.config
    u = _as_control(asm, u)
    Y = np.empty((asm.n_steps + 1, asm.n_interior))
    Y[0] = asm.y_init
    newton_log = [] if collect_newton else None
    for step in range(1, asm.n_steps + 1):
        y_prev = Y[step - 1]
        load = asm.M @ asm.extend(u[step - 1]) + asm.mass_forcing[step - 1]
        y = y_prev.copy()
        residuals = []
        for _ in range(cfg.newton_max + 1):
            c_full, _ = convection(asm.pad(y))
            residual = (
                asm.M @ ((y - y_prev) / asm.dt)
                + cfg.viscosity * (asm.K @ y)
                + c_full[1:-1]
                - load
            )
            res_norm = float(np.linalg.norm(residual))
            residuals.append(res_norm)
            if res_norm < cfg.newton_tol:
                break
            y = y + _banded_solve(_step_bands(asm, y), -residual)
        else:
            raise NewtonFailureError(
                f"Newton stalled at time step {step} (residual {res_norm:.3e})",
                step=step,
                residual=res_norm,
            )
        Y[step] = y
        if newton_log is not None:
            newton_log.append(residuals)
    return (Y, newton_log) if collect_newton else Y


def solve_adjoint(asm, Y):
    """Backward transpose sweep; returns P of shape (N, n_interior), one
    multiplier per implicit-Euler step (steps 1..N)."""
    cfg = asm.config
    n_steps = asm.n_steps
    P = np.empty((n_steps, asm.n_interior))
    p_next = np.zeros(asm.n_interior)
    for step in range(n_steps, 0, -1):
        rhs = asm.M @ p_next / asm.dt + cfg.alpha1 * asm.dt * (
            asm.M @ (asm.yd[step - 1] - Y[step])
        )
        if step == n_steps:
            rhs = rhs + cfg.alpha2 * (asm.M @ (asm.zd - Y[n_steps]))
        p = _banded_solve(_step_bands(asm, Y[step]), rhs, transpose=True)
        P[step - 1] = p
        p_next = p
    return P


def solve_tangent(asm, Y, du):
    """Linearized state response to a control perturbation (oracle for the
    adjoint identity; same Jacobians as the converged forward sweep)."""
    du = _as_control(asm, du)
    q = np.zeros(asm.n_interior)
    Q = np.empty((asm.n_steps + 1, asm.n_interior))
    Q[0] = q
    for step in range(1, asm.n_steps + 1):
        rhs = asm.M @ q / asm.dt + asm.M @ asm.extend(du[step - 1])
        q = _banded_solve(_step_bands(asm, Y[step]), rhs)
        Q[step] = q
    return Q


def gradient(asm, beta, u):
    """beta*u - B'p in the control-space inner product."""
    u = _as_control(asm, u)
    Y = solve_state(asm, u)
    P = solve_adjoint(asm, Y)
    lifted = np.empty_like(u)
    for step in range(asm.n_steps):
        rhs = (asm.M @ P[step])[asm.control_idx]
        lifted[step] = asm._control_mass_lu.solve(rhs) / asm.dt
    return (beta * u - lifted).ravel()


def objective(asm, beta, u):
    """Right-endpoint rectangle rule in time composed with mass norms."""
    cfg = asm.config
    u = _as_control(asm, u)
    Y = solve_state(asm, u)
    track = 0.0
    for step in range(1, asm.n_steps + 1):
        r = Y[step] - asm.yd[step - 1]
        track += float(r @ (asm.M @ r))
    track *= 0.5 * cfg.alpha1 * asm.dt
    rT = Y[asm.n_steps] - asm.zd
    terminal = 0.5 * cfg.alpha2 * float(rT @ (asm.M @ rT))
    penalty = 0.5 * beta * asm.dt * float(
        np.einsum("ni,ni->", u, u @ asm.control_mass.T)
    )
    return track + terminal + penalty


def reduced_problem(asm, beta):
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    return GradientProblem(
        space=asm.control_space(),
        gradient=lambda u: gradient(asm, beta, u),
        dimension=asm.n_steps * asm.n_control,
        objective=lambda u: objective(asm, beta, u),
    )


def burgers_problem(config):
    asm = assemble(config)
    return asm, reduced_problem(asm, config.beta)
