"""Sparse matrix assembly and direct solves with reusable factorizations.

Thin layer over scipy.sparse: CSR storage, SuperLU factorization with a
module-level factorization counter (the time steppers factor each
constant-coefficient operator exactly once and the counter lets tests assert
that), a residual check on every solve, and an unpreconditioned BiCGStab
fallback for meshes too large for a direct solve.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


_factorizations = 0


def factorization_count():
    return _factorizations


def reset_factorization_count():
    global _factorizations
    _factorizations = 0


def assemble_from_triplets(m, n, rows, cols, values):
    """CSR matrix from COO triplets; duplicate (row, col) entries are summed."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if len(rows) and (rows.min() < 0 or rows.max() >= m):
        raise IndexError("row index out of range")
    if len(cols) and (cols.min() < 0 or cols.max() >= n):
        raise IndexError("column index out of range")
    a = sp.coo_matrix((values, (rows, cols)), shape=(m, n)).tocsr()
    a.sum_duplicates()
    return a


def matvec(a, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (a.shape[1],):
        raise ValueError(f"dimension mismatch: {a.shape} @ {x.shape}")
    return a @ x


class LuFactors:
    """Sparse LU of a square matrix, reusable across right-hand sides.

    Every solve is residual-checked: ||Ax - b|| <= tol (||A||_F ||x|| + ||b||).
    """

    def __init__(self, a, tol=1e-10):
        global _factorizations
        if a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        self.a = a.tocsr()
        self.tol = tol
        self.norm_f = np.sqrt((self.a.data ** 2).sum())
        try:
            self._lu = spla.splu(a.tocsc())
        except RuntimeError as exc:
            raise SolverError(f"LU factorization failed: {exc}") from exc
        _factorizations += 1

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape != (self.a.shape[0],):
            raise ValueError("right-hand side has wrong length")
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolverError("solve produced non-finite values")
        res = np.linalg.norm(self.a @ x - b)
        bound = self.tol * (self.norm_f * np.linalg.norm(x) + np.linalg.norm(b))
        if res > max(bound, 1e-300):
            raise SolverError(f"solve residual {res:.3e} exceeds bound {bound:.3e}")
        return x


class BicgstabOperator:
    """Iterative fallback with the same solve interface as LuFactors."""

    def __init__(self, a, tol=1e-10, maxiter=20000):
        global _factorizations
        self.a = a.tocsr()
        self.tol = tol
        self.maxiter = maxiter
        self.norm_f = np.sqrt((self.a.data ** 2).sum())
        _factorizations += 1  # counts as one operator setup

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x, info = spla.bicgstab(self.a, b, rtol=1e-12, atol=1e-14,
                                maxiter=self.maxiter)
        if info != 0:
            raise SolverError(f"bicgstab did not converge (info={info})")
        res = np.linalg.norm(self.a @ x - b)
        bound = self.tol * (self.norm_f * np.linalg.norm(x) + np.linalg.norm(b))
        if res > max(bound, 1e-300):
            raise SolverError(f"iterative residual {res:.3e} exceeds {bound:.3e}")
        return x


def lu_factorize(a, tol=1e-10):
    return LuFactors(a, tol=tol)


def solve(factors, b):
    return factors.solve(b)


class ConstrainedSystem:
    """Square system with Dirichlet rows/columns eliminated.

    Factorizes A restricted to the free unknowns once; each solve takes the
    full right-hand side plus the constrained values and returns the full
    solution vector.
    """

    def __init__(self, a, constrained, n, method="lu"):
        constrained = np.asarray(constrained, dtype=np.int64)
        mask = np.zeros(n, dtype=bool)
        mask[constrained] = True
        self.free = np.nonzero(~mask)[0]
        self.constrained = np.nonzero(mask)[0]
        a = a.tocsr()
        a_free = a[self.free]
        self.a_ff = a_free[:, self.free].tocsr()
        self.a_fc = a_free[:, self.constrained].tocsr()
        if method == "lu":
            self.op = LuFactors(self.a_ff)
        elif method == "bicgstab":
            self.op = BicgstabOperator(self.a_ff)
        else:
            raise ValueError(f"unknown solver method {method!r}")

    def solve(self, rhs, values=None):
        rhs = np.asarray(rhs, dtype=float)
        x = np.empty_like(rhs)
        b = rhs[self.free]
        if values is not None and len(self.constrained):
            values = np.asarray(values, dtype=float)
            b = b - self.a_fc @ values
            x[self.constrained] = values
        else:
            x[self.constrained] = 0.0
        x[self.free] = self.op.solve(b)
        return x
