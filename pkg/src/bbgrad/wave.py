"""Neumann boundary control of the wave equation on the unit square.

State: y_tt - Lap(y) = f with Neumann data u on the controlled part of the
boundary (right and top edges), homogeneous Dirichlet on the rest, advanced
as a first-order system (y_t = v) by the trapezoidal rule. Controls are
piecewise constant in time and piecewise linear along the controlled edges.

The reduced gradient is the exact discrete transpose of the time stepping
applied to the discretized objective, so finite differences of the
objective match it to solver precision. Time integrals pair interval
midpoint values of the linear-in-time state with the piecewise-constant
test functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bb import GradientProblem
from .linalg import WeightedSpace, build_sparse
from .mesh2d import p1_matrices, unit_square_mesh


@dataclass(frozen=True)
class WaveConfig:
    alpha1: float
    alpha2: float
    beta: float
    level: int
    dt: float  # requested; rounded so the step count N = round(T/dt) is integral
    y0_disp: Callable[[np.ndarray, np.ndarray], np.ndarray]
    y0_vel: Callable[[np.ndarray, np.ndarray], np.ndarray]
    forcing: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    y_d: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    z_d: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    T: float = 1.0
    all_dirichlet: bool = False  # clamp the whole boundary (no control); test oracle

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta", "dt", "T"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def benchmark_config(beta, level, dt):
    """Standing-mode initial displacement, travelling forcing, kinked target."""

    def y_d(x1, x2):
        return np.where(x1 < 0.5, -x1, x1)

    return WaveConfig(
        alpha1=1.0,
        alpha2=1.0,
        beta=beta,
        level=level,
        dt=dt,
        y0_disp=lambda x1, x2: np.sin(np.pi * x1) * np.sin(np.pi * x2),
        y0_vel=lambda x1, x2: np.zeros_like(x1),
        forcing=lambda t, x1, x2: np.pi**2 * np.sin(np.pi * x1 * t) * np.sin(np.pi * x2 * t),
        y_d=y_d,
        z_d=None,
    )


class WaveAssembly:
    """Space-time grid, matrices, and data; beta-independent."""

    def __init__(self, config):
        self.config = config
        self.mesh = unit_square_mesh(config.level)
        mesh = self.mesh
        n = mesh.cells_per_side

        self.n_steps = max(1, round(config.T / config.dt))
        self.dt = config.T / self.n_steps

        ii = np.arange(mesh.n_nodes) % (n + 1)
        jj = np.arange(mesh.n_nodes) // (n + 1)
        # Dirichlet on the closure of the bottom and left edges; the nodes
        # (1, 0) and (0, 1) between the clamped and controlled parts are
        # clamped, so control DOFs are the remaining right/top edge nodes.
        dirichlet = (ii == 0) | (jj == 0)
        if config.all_dirichlet:
            dirichlet |= (ii == n) | (jj == n)
        self.free = np.flatnonzero(~dirichlet)
        self._free_pos = np.full(mesh.n_nodes, -1, dtype=int)
        self._free_pos[self.free] = np.arange(self.free.size)

        right = [mesh.node_id(n, j) for j in range(1, n + 1)]
        top = [mesh.node_id(i, n) for i in range(n - 1, 0, -1)]
        self.control_nodes = np.array([] if config.all_dirichlet else right + top, dtype=int)
        self.control_pos = self._free_pos[self.control_nodes]

        K_full, M_full = p1_matrices(mesh)
        self.M_full = M_full
        self.K = K_full[self.free][:, self.free].tocsr()
        self.M = M_full[self.free][:, self.free].tocsr()
        self.control_mass = self._control_boundary_mass()

        c2 = 0.25 * self.dt**2
        self._stepper = spla.splu((self.M + c2 * self.K).tocsc())
        self._lhs_mirror = (self.M - c2 * self.K).tocsr()

        x1, x2 = mesh.coords[:, 0], mesh.coords[:, 1]
        disp = np.asarray(config.y0_disp(x1, x2), dtype=float)
        vel = np.asarray(config.y0_vel(x1, x2), dtype=float)
        self.y_init = disp[self.free]
        self.v_init = vel[self.free]
        self.yd_full = (
            np.asarray(config.y_d(x1, x2), dtype=float)
            if config.y_d is not None
            else np.zeros(mesh.n_nodes)
        )
        self.zd_full = (
            np.asarray(config.z_d(x1, x2), dtype=float)
            if config.z_d is not None
            else np.zeros(mesh.n_nodes)
        )
        # Forcing enters through the mass matrix at interval midpoints.
        self.force_terms = []
        for step in range(self.n_steps):
            if config.forcing is None:
                self.force_terms.append(np.zeros(self.free.size))
            else:
                t_mid = (step + 0.5) * self.dt
                f_nodal = np.asarray(config.forcing(t_mid, x1, x2), dtype=float)
                self.force_terms.append((M_full @ f_nodal)[self.free])

    def _control_boundary_mass(self):
        if self.control_nodes.size == 0:
            return sp.csr_matrix((0, 0))
        mesh = self.mesh
        n = mesh.cells_per_side
        edges = [(mesh.node_id(n, j), mesh.node_id(n, j + 1)) for j in range(n)]
        edges += [(mesh.node_id(i + 1, n), mesh.node_id(i, n)) for i in range(n - 1, -1, -1)]
        local = {node: idx for idx, node in enumerate(self.control_nodes)}
        rows, cols, vals = [], [], []
        third, sixth = mesh.spacing / 3.0, mesh.spacing / 6.0
        for a, b in edges:
            for node_r, node_c, val in (
                (a, a, third),
                (b, b, third),
                (a, b, sixth),
                (b, a, sixth),
            ):
                if node_r in local and node_c in local:
                    rows.append(local[node_r])
                    cols.append(local[node_c])
                    vals.append(val)
        size = self.control_nodes.size
        return build_sparse(rows, cols, vals, (size, size), symmetric=True)

    @property
    def n_control(self):
        return self.control_nodes.size

    def control_shape(self):
        return (self.n_steps, self.n_control)

    def embed(self, w_free):
        full = np.zeros(self.mesh.n_nodes)
        full[self.free] = w_free
        return full

    def control_space(self):
        """L2 inner product over the space-time control cylinder."""
        gram = self.dt * sp.kron(sp.identity(self.n_steps), self.control_mass, format="csr")
        return WeightedSpace(gram)


def assemble(config):
    return WaveAssembly(config)


def _as_control(asm, u):
    u = np.asarray(u, dtype=float)
    return u.reshape(asm.control_shape())


def solve_state(asm, u):
    """Trapezoidal sweep of the first-order system; returns (Y, V)."""
    u = _as_control(asm, u)
    n_steps, dt = asm.n_steps, asm.dt
    Y = np.empty((n_steps + 1, asm.free.size))
    V = np.empty_like(Y)
    Y[0], V[0] = asm.y_init, asm.v_init
    for step in range(n_steps):
        load = asm.force_terms[step].copy()
        if asm.n_control:
            load[asm.control_pos] += asm.control_mass @ u[step]
        rhs = asm._lhs_mirror @ V[step] - dt * (asm.K @ Y[step]) + dt * load
        V[step + 1] = asm._stepper.solve(rhs)
        Y[step + 1] = Y[step] + 0.5 * dt * (V[step] + V[step + 1])
    return Y, V


def _midpoint_residual(asm, Y, step):
    """Full-node tracking residual at the midpoint of interval ``step``."""
    ybar = 0.5 * (Y[step] + Y[step + 1])
    return asm.embed(ybar) - asm.yd_full


def _tracking_derivatives(asm, Y):
    """d_n = dJ/dy^n (free nodes) for n = 1..N, tracking terms only."""
    cfg = asm.config
    n_steps, dt = asm.n_steps, asm.dt
    mres = [asm.M_full @ _midpoint_residual(asm, Y, s) for s in range(n_steps)]
    d = np.zeros((n_steps + 1, asm.free.size))
    for n in range(1, n_steps):
        d[n] = 0.5 * cfg.alpha1 * dt * (mres[n - 1][asm.free] + mres[n][asm.free])
    terminal = asm.M_full @ (asm.embed(Y[n_steps]) - asm.zd_full)
    d[n_steps] = 0.5 * cfg.alpha1 * dt * mres[n_steps - 1][asm.free] + cfg.alpha2 * terminal[asm.free]
    return d


def solve_adjoint(asm, Y):
    """Backward sweep of the exact transpose; returns the interval
    multipliers Q (one per time interval, piecewise constant in time)."""
    n_steps, dt = asm.n_steps, asm.dt
    d = _tracking_derivatives(asm, Y)
    Q = np.empty((n_steps, asm.free.size))
    q = asm._stepper.solve(-0.5 * dt * d[n_steps])
    p = -d[n_steps] - 0.5 * dt * (asm.K @ q)
    Q[n_steps - 1] = q
    for n in range(n_steps - 1, 0, -1):
        rhs = asm._lhs_mirror @ q + dt * p - 0.5 * dt * d[n]
        q_prev = asm._stepper.solve(rhs)
        p = p - d[n] - 0.5 * dt * (asm.K @ (q + q_prev))
        q = q_prev
        Q[n - 1] = q
    return Q


def gradient(asm, beta, u):
    """beta*u minus the controlled-boundary trace of the interval adjoint."""
    u = _as_control(asm, u)
    Y, _ = solve_state(asm, u)
    Q = solve_adjoint(asm, Y)
    return (beta * u - Q[:, asm.control_pos]).ravel()


def objective(asm, beta, u):
    u = _as_control(asm, u)
    Y, _ = solve_state(asm, u)
    cfg = asm.config
    dt = asm.dt
    track = 0.0
    for step in range(asm.n_steps):
        r = _midpoint_residual(asm, Y, step)
        track += r @ (asm.M_full @ r)
    track *= 0.5 * cfg.alpha1 * dt
    rT = asm.embed(Y[asm.n_steps]) - asm.zd_full
    terminal = 0.5 * cfg.alpha2 * float(rT @ (asm.M_full @ rT))
    penalty = 0.5 * beta * dt * float(np.einsum("ni,ni->", u, u @ asm.control_mass.T))
    return float(track) + terminal + penalty


def energy(asm, Y, V):
    """Discrete energy 0.5 (v' M v + y' K y) per time level (conserved when
    forcing and control vanish)."""
    return 0.5 * (
        np.einsum("ni,ni->n", V, (asm.M @ V.T).T) + np.einsum("ni,ni->n", Y, (asm.K @ Y.T).T)
    )


def reduced_problem(asm, beta):
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    return GradientProblem(
        space=asm.control_space(),
        gradient=lambda u: gradient(asm, beta, u),
        dimension=asm.n_steps * asm.n_control,
        objective=lambda u: objective(asm, beta, u),
    )


def wave_problem(config):
    asm = assemble(config)
    return asm, reduced_problem(asm, config.beta)
