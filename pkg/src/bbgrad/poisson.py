"""Dirichlet boundary control of the Poisson equation on the unit square.

State: -Lap(y) = f in Omega, y = u on the boundary. The reduced objective

    F(u) = 1/2 ||y(u) - y_d||^2_{L2(Omega)} + beta/2 ||u||^2_{L2(Gamma)}

is an SPD quadratic over the boundary trace space equipped with the
boundary mass inner product. Its gradient is computed through the adjoint
state and a variationally defined discrete normal derivative, which makes
it the exact gradient of the discrete objective.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from .bb import GradientProblem
from .errors import SolverFailureError
from .linalg import WeightedSpace
from .mesh2d import chain_p1_mass, p1_matrices, unit_square_mesh

#: Interior rows of K p - M (y - y_d) must vanish for a valid adjoint state.
ADJOINT_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class PoissonConfig:
    beta: float
    level: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    y_d: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError("beta must be positive")


def benchmark_config(beta, level):
    """Forcing 10 sin(pi (x1+x2)) with target (x1^2 + x2^2)^(1/3)."""
    return PoissonConfig(
        beta=beta,
        level=level,
        f=lambda x1, x2: 10.0 * np.sin(np.pi * (x1 + x2)),
        y_d=lambda x1, x2: (x1**2 + x2**2) ** (1.0 / 3.0),
    )


class PoissonAssembly:
    """Mesh, matrices, and interpolated data for one discretization level.

    Independent of beta: the control-cost weight enters only in
    :func:`gradient` and :func:`objective`.
    """

    def __init__(self, config):
        if config.level < 2:
            raise ValueError("level must be at least 2")
        self.config = config
        self.mesh = unit_square_mesh(config.level)
        self.K, self.M = p1_matrices(self.mesh)

        self.boundary = self.mesh.boundary_cycle
        self.interior = self.mesh.interior_ids()
        self.boundary_mass = chain_p1_mass(
            self.boundary.size, self.mesh.spacing, cyclic=True
        )
        self.space = WeightedSpace(self.boundary_mass)

        x1, x2 = self.mesh.coords[:, 0], self.mesh.coords[:, 1]
        self.f_h = np.asarray(config.f(x1, x2), dtype=float)
        self.yd_h = np.asarray(config.y_d(x1, x2), dtype=float)

        self.K_II = self.K[self.interior][:, self.interior].tocsc()
        self.K_IB = self.K[self.interior][:, self.boundary].tocsr()
        self._interior_factor = spla.splu(self.K_II)
        self._mass_f_interior = (self.M @ self.f_h)[self.interior]

    @property
    def n_boundary(self):
        return self.boundary.size


def assemble(config):
    return PoissonAssembly(config)


def solve_state(asm, u_bdry):
    """Dirichlet lift: y = u on the boundary, interior rows tested in V0."""
    u_bdry = np.asarray(u_bdry, dtype=float)
    rhs = asm._mass_f_interior - asm.K_IB @ u_bdry
    y = np.zeros(asm.mesh.n_nodes)
    y[asm.boundary] = u_bdry
    y[asm.interior] = asm._interior_factor.solve(rhs)
    return y


def solve_adjoint(asm, y):
    """Adjoint state in V0 driven by the tracking residual y - y_d."""
    rhs = (asm.M @ (y - asm.yd_h))[asm.interior]
    p = np.zeros(asm.mesh.n_nodes)
    p[asm.interior] = asm._interior_factor.solve(rhs)
    return p


def discrete_normal_derivative(asm, p, y):
    """Boundary function d with (d, phi)_Gamma = (grad p, grad phi) - (y - y_d, phi).

    Interior rows of the defining residual vanish because p solves the
    adjoint equation; this is asserted before restricting to the boundary.
    """
    residual = asm.K @ p - asm.M @ (y - asm.yd_h)
    leak = float(np.abs(residual[asm.interior]).max(initial=0.0))
    if leak > ADJOINT_RESIDUAL_TOL:
        raise SolverFailureError(
            f"adjoint residual leaks into interior rows ({leak:.3e})", residual=leak
        )
    return asm.space.apply_inverse(residual[asm.boundary])


def gradient(asm, beta, u_bdry):
    """Riesz representative of the reduced derivative in the boundary mass
    inner product: beta*u minus the discrete normal derivative of the
    adjoint state."""
    y = solve_state(asm, u_bdry)
    p = solve_adjoint(asm, y)
    d = discrete_normal_derivative(asm, p, y)
    return beta * np.asarray(u_bdry, dtype=float) - d


def objective(asm, beta, u_bdry):
    y = solve_state(asm, u_bdry)
    r = y - asm.yd_h
    track = 0.5 * float(r @ (asm.M @ r))
    u_bdry = np.asarray(u_bdry, dtype=float)
    penalty = 0.5 * beta * float(u_bdry @ (asm.boundary_mass @ u_bdry))
    return track + penalty


def reduced_problem(asm, beta):
    if not beta > 0.0:
        raise ValueError("beta must be positive")
    return GradientProblem(
        space=asm.space,
        gradient=lambda u: gradient(asm, beta, u),
        dimension=asm.n_boundary,
        objective=lambda u: objective(asm, beta, u),
    )


def poisson_problem(config):
    """Assemble and wrap into a GradientProblem over the boundary controls."""
    asm = assemble(config)
    return asm, reduced_problem(asm, config.beta)
