"""Block-system composition and sparse linear solves.

The time stepper produces a 6x6 block saddle-point system for the primal
fields and a smaller curl-curl system for H.  Both are put together block
by block and solved monolithically.  Direct factorization is the default:
the conservation checks downstream presuppose residuals near machine
precision, and the systems are desk-scale.
"""

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NoConvergence, ShapeMismatch, SingularMatrix

# ----------------------------------------------------------------------
# block composition
# ----------------------------------------------------------------------


def _grid_sizes(blocks):
    """Infer row/column sizes of a block grid and check consistency."""
    nrows = len(blocks)
    ncols = len(blocks[0])
    for row in blocks:
        if len(row) != ncols:
            raise ShapeMismatch("ragged block grid")
    rsize = [None] * nrows
    csize = [None] * ncols
    for i, row in enumerate(blocks):
        for j, blk in enumerate(row):
            if blk is None:
                continue
            r, c = blk.shape
            if rsize[i] is None:
                rsize[i] = r
            elif rsize[i] != r:
                raise ShapeMismatch(
                    "block (%d, %d) has %d rows, expected %d" % (i, j, r, rsize[i])
                )
            if csize[j] is None:
                csize[j] = c
            elif csize[j] != c:
                raise ShapeMismatch(
                    "block (%d, %d) has %d columns, expected %d" % (i, j, c, csize[j])
                )
    for i, r in enumerate(rsize):
        if r is None:
            raise ShapeMismatch("block row %d is entirely empty" % i)
    for j, c in enumerate(csize):
        if c is None:
            raise ShapeMismatch("block column %d is entirely empty" % j)
    return rsize, csize


def compose(blocks, rhs):
    """Assemble a grid of sparse blocks and RHS segments into one system.

    Parameters
    ----------
    blocks : list of list of sparse matrix or None
        Rectangular grid of blocks; None marks a zero block.  Every block
        row and column must contain at least one matrix so sizes can be
        inferred.
    rhs : list of ndarray
        One vector segment per block row.

    Returns
    -------
    A : csr_matrix
        Monolithic matrix.
    b : ndarray
        Concatenated right-hand side.
    """
    rsize, _ = _grid_sizes(blocks)
    if len(rhs) != len(blocks):
        raise ShapeMismatch(
            "%d RHS segments for %d block rows" % (len(rhs), len(blocks))
        )
    for i, seg in enumerate(rhs):
        if seg.shape != (rsize[i],):
            raise ShapeMismatch(
                "RHS segment %d has shape %s, expected (%d,)"
                % (i, seg.shape, rsize[i])
            )
    A = sp.bmat(blocks, format="csr")
    b = np.concatenate(rhs)
    return A, b


# ----------------------------------------------------------------------
# solvers
# ----------------------------------------------------------------------


class Factorization:
    """Sparse LU factorization of a square matrix.

    Build once, apply to as many right-hand sides as needed.  The object
    is immutable after construction; the stepper rebuilds it whenever the
    matrix changes (the step-1 matrix carries frozen fields and therefore
    changes every iteration).
    """

    def __init__(self, A):
        if A.shape[0] != A.shape[1]:
            raise ShapeMismatch("cannot factorize %s matrix" % (A.shape,))
        self.shape = A.shape
        try:
            self._lu = spla.splu(sp.csc_matrix(A))
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc

    def solve(self, b):
        if b.shape != (self.shape[0],):
            raise ShapeMismatch(
                "RHS has shape %s, matrix is %s" % (b.shape, self.shape)
            )
        return self._lu.solve(b)


def relative_residual(A, x, b):
    """2-norm of A x - b relative to b (absolute when b vanishes)."""
    scale = np.linalg.norm(b)
    if scale == 0.0:
        scale = 1.0
    return np.linalg.norm(A @ x - b) / scale


def solve(A, b, method="direct", tol=1e-12, maxit=500):
    """Solve A x = b and report the relative residual.

    Parameters
    ----------
    A : sparse matrix
        Square system matrix.
    b : ndarray
        Right-hand side.
    method : {"direct", "iterative"}
        Direct sparse LU, or ILU-preconditioned GMRES.
    tol : float
        Iterative target for the relative residual.
    maxit : int
        Iterative iteration cap.

    Returns
    -------
    x : ndarray
    relres : float
        ||A x - b|| / ||b||, recomputed from the returned x.
    """
    if method == "direct":
        x = Factorization(A).solve(b)
    elif method == "iterative":
        Ac = sp.csc_matrix(A)
        try:
            ilu = spla.spilu(Ac, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as exc:
            raise SingularMatrix(str(exc)) from exc
        prec = spla.LinearOperator(A.shape, ilu.solve)
        x, info = spla.gmres(Ac, b, rtol=tol, atol=0.0, maxiter=maxit, M=prec)
        if info != 0:
            raise NoConvergence(maxit, relative_residual(A, x, b))
    else:
        raise ValueError("unknown method %r" % method)
    return x, relative_residual(A, x, b)


def export_matrix(A, path):
    """Write a sparse matrix in Matrix Market format (debugging aid)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
