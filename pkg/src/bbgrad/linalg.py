"""Sparse assembly, SPD linear solves, and weighted inner products.

Vectors are plain 1-D float64 numpy arrays; sparse matrices are scipy CSR.
Symmetry, where promised, is enforced at assembly time by exact
symmetrization rather than carried as a runtime flag.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatchError, MatrixNotSpdError, SolverFailureError

# Above this many unknowns solve_spd switches from a direct factorization to
# preconditioned conjugate gradients.
DIRECT_SOLVE_LIMIT = 200_000

DEFAULT_TOL = 1e-12


def build_sparse(rows, cols, vals, shape, symmetric=False):
    """Assemble a CSR matrix from triplets; duplicate entries are summed.

    With ``symmetric=True`` the result is (A + A.T)/2, which makes
    a_ij == a_ji hold exactly and irons out the nonassociativity of the
    accumulation order.
    """
    mat = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=shape).tocsr()
    if symmetric:
        mat = (mat + mat.T) * 0.5
    mat.sum_duplicates()
    return mat


class WeightedSpace:
    """Discrete inner-product space (u, v) = u^T W v with an SPD Gram matrix W."""

    def __init__(self, gram):
        gram = sp.csr_matrix(gram)
        if gram.shape[0] != gram.shape[1]:
            raise DimensionMismatchError(f"Gram matrix must be square, got {gram.shape}")
        self.gram = gram
        self.dimension = gram.shape[0]

    @cached_property
    def _factor(self):
        return spla.splu(self.gram.tocsc())

    def apply_inverse(self, rhs):
        """Riesz lift: solve W x = rhs with a cached factorization."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"rhs has shape {rhs.shape}, space dimension is {self.dimension}"
            )
        return self._factor.solve(rhs)


def _check_vec(space, u, name):
    u = np.asarray(u, dtype=float)
    if u.shape != (space.dimension,):
        raise DimensionMismatchError(
            f"{name} has shape {u.shape}, space dimension is {space.dimension}"
        )
    return u


def wdot(space, u, v):
    """Weighted inner product u^T W v."""
    u = _check_vec(space, u, "u")
    v = _check_vec(space, v, "v")
    return float(u @ (space.gram @ v))


def wnorm(space, u):
    """Weighted norm sqrt(u^T W u); tiny negative round-off is clamped."""
    return float(np.sqrt(max(wdot(space, u, u), 0.0)))


def _pcg(A, b, tol, max_iter):
    """Jacobi-preconditioned CG with explicit negative-curvature detection."""
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise MatrixNotSpdError("matrix has a nonpositive diagonal entry")
    inv_diag = 1.0 / diag
    b_norm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(max_iter):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise MatrixNotSpdError("negative curvature direction encountered in CG")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        res = float(np.linalg.norm(r))
        if res <= tol * b_norm:
            return x
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailureError(
        f"CG did not converge within {max_iter} iterations", residual=float(np.linalg.norm(r))
    )


def solve_spd(A, b, tol=DEFAULT_TOL, direct_limit=None):
    """Solve A x = b for symmetric positive definite A.

    Uses a direct sparse factorization up to ``direct_limit`` unknowns
    (default DIRECT_SOLVE_LIMIT) and Jacobi-preconditioned CG above it.
    The returned x satisfies ||A x - b||_2 <= tol * ||b||_2.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {A.shape}")
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise DimensionMismatchError(f"rhs has shape {b.shape}, expected ({n},)")
    if np.any(A.diagonal() <= 0.0):
        raise MatrixNotSpdError("matrix has a nonpositive diagonal entry")

    limit = DIRECT_SOLVE_LIMIT if direct_limit is None else direct_limit
    if n <= limit:
        try:
            x = spla.splu(A.tocsc()).solve(b)
        except RuntimeError as exc:
            raise SolverFailureError(f"sparse factorization failed: {exc}") from exc
    else:
        x = _pcg(A, b, tol, max_iter=max(10 * n, 1000))

    residual = float(np.linalg.norm(A @ x - b))
    if not np.all(np.isfinite(x)):
        raise SolverFailureError("solution contains non-finite entries", residual=residual)
    if residual > tol * max(float(np.linalg.norm(b)), np.finfo(float).tiny):
        raise SolverFailureError(
            f"residual {residual:.3e} exceeds tolerance", residual=residual
        )
    return x


def solve_general(A, b, tol=DEFAULT_TOL):
    """Solve A x = b for a square nonsingular (possibly nonsymmetric) A."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"matrix must be square, got {A.shape}")
    b = np.asarray(b, dtype=float)
    if b.shape != (n,):
        raise DimensionMismatchError(f"rhs has shape {b.shape}, expected ({n},)")
    try:
        x = spla.splu(A.tocsc()).solve(b)
    except RuntimeError as exc:
        raise SolverFailureError(f"sparse factorization failed: {exc}") from exc
    residual = float(np.linalg.norm(A @ x - b))
    if not np.all(np.isfinite(x)):
        raise SolverFailureError("solution contains non-finite entries", residual=residual)
    if residual > tol * max(float(np.linalg.norm(b)), np.finfo(float).tiny):
        raise SolverFailureError(
            f"residual {residual:.3e} exceeds tolerance", residual=residual
        )
    return x
