"""Discrete de Rham complex on a hexahedral mesh.

Four conforming tensor-product spaces built from the 1D spectral pair
(nodal degree N, edge degree N-1):

    G (grad-conforming, scalar)   node x node x node
    C (curl-conforming, vector)   x-component: edge x node x node, etc.
    D (div-conforming, vector)    x-component: node x edge x edge, etc.
    S (L^2, scalar)               edge x edge x edge

plus the subspace C0 of C with vanishing tangential boundary trace.
Degrees of freedom are shared across element interfaces; the integer
incidence matrices E_grad, C_curl, D_div are the discrete differential
operators and satisfy C_curl E_grad = 0 and D_div C_curl = 0 exactly.

Global numbering is tensor style: with n = N*K segments and m = n + 1
nodes per axis, every DOF is indexed by its (x, y, z) tuple with the
x index running fastest; vector components are concatenated x, y, z.
All edges and faces are oriented along increasing coordinates, which
makes every local-to-global sign +1.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SpaceMismatch
from .mesh import element_geometry
from .polynomials import edge_eval, lagrange_eval, lobatto_nodes

SPACES = ("G", "C", "C0", "D", "S")


@dataclass
class DiscreteField:
    """Coefficient vector tagged with its space and a step label.

    time_label is the step index (an integer k or a half step k + 1/2);
    None for fields without an attached time.
    """

    space: str
    coefficients: np.ndarray
    time_label: float | None = None

    def __post_init__(self):
        if self.space not in SPACES:
            raise SpaceMismatch(f"unknown space {self.space!r}")
        self.coefficients = np.asarray(self.coefficients, dtype=float)


@dataclass
class BasisEvaluation:
    """Physical-space values of all local basis functions of one element.

    values has shape (n_local, n_points) for the scalar spaces G and S
    and (n_local, n_points, 3) for C and D.
    """

    space: str
    element: int
    points: np.ndarray
    values: np.ndarray


class DeRhamComplex:
    """Dimension data, DOF tables, and incidence matrices for one mesh."""

    def __init__(self, mesh, N):
        if N < 1:
            raise ValueError(f"degree must be >= 1, got {N}")
        self.mesh = mesh
        self.N = N
        self.nodes = lobatto_nodes(N)
        n = N * mesh.K
        m = n + 1
        self.n_segments = n
        self.n_nodes = m
        self.dims = {
            "G": m**3,
            "C": 3 * n * m**2,
            "D": 3 * m * n**2,
            "S": n**3,
        }
        self._mask_C = _boundary_mask_C(n)
        self.dims["C0"] = int(self.dims["C"] - self._mask_C.sum())
        self._tables = _dof_tables(mesh.K, N)
        self.E_grad, self.C_curl, self.D_div = _incidence(n)
        self.C0_curl = self.C_curl[:, ~self._mask_C].tocsr()
        self.cache = {}

    def dim(self, space):
        if space not in SPACES:
            raise SpaceMismatch(f"unknown space {space!r}")
        return self.dims[space]

    def dof_table(self, space):
        """(n_elements, n_local) global DOF indices; C0 shares C's table."""
        if space == "C0":
            space = "C"
        return self._tables[space]

    @property
    def boundary_mask(self):
        """Boolean mask over C DOFs; True marks tangential boundary DOFs."""
        return self._mask_C

    def zero_field(self, space, time_label=None):
        return DiscreteField(space, np.zeros(self.dim(space)), time_label)


# ----------------------------------------------------------------------
# numbering helpers
# ----------------------------------------------------------------------
#
# Axis index layouts (x fastest):
#   G      node (i,j,k)            -> i + m j + m^2 k
#   C x    seg/node/node (s,j,k)   -> s + n j + n m k
#   C y    node/seg/node (i,s,k)   -> i + m s + m n k     (+ offset n m^2)
#   C z    node/node/seg (i,j,s)   -> i + m j + m^2 s     (+ offset 2 n m^2)
#   D x    node/seg/seg (i,s,t)    -> i + m s + m n t
#   D y    seg/node/seg (s,j,t)    -> s + n j + n m t     (+ offset m n^2)
#   D z    seg/seg/node (s,t,k)    -> s + n t + n^2 k     (+ offset 2 m n^2)
#   S      seg (s,t,u)             -> s + n t + n^2 u


def _combine(fast, mid, slow, w_mid, w_slow):
    """Global index array from per-axis index arrays, fast axis first.

    Each argument is (n_elem, len_axis); the result is (n_elem, prod)
    flattened with the fast axis running fastest.
    """
    out = (
        fast[:, None, None, :]
        + w_mid * mid[:, None, :, None]
        + w_slow * slow[:, :, None, None]
    )
    return out.reshape(out.shape[0], -1)


def _dof_tables(K, N):
    n = N * K
    m = n + 1
    idx = np.arange(K**3)
    elems = np.column_stack([idx % K, (idx // K) % K, idx // K**2])
    node = np.arange(N + 1)
    seg = np.arange(N)
    en = [elems[:, d, None] * N + node for d in range(3)]  # global node ids
    es = [elems[:, d, None] * N + seg for d in range(3)]  # global segment ids

    tables = {}
    tables["G"] = _combine(en[0], en[1], en[2], m, m * m)

    cx = _combine(es[0], en[1], en[2], n, n * m)
    cy = _combine(en[0], es[1], en[2], m, m * n) + n * m**2
    cz = _combine(en[0], en[1], es[2], m, m * m) + 2 * n * m**2
    tables["C"] = np.concatenate([cx, cy, cz], axis=1)

    dx = _combine(en[0], es[1], es[2], m, m * n)
    dy = _combine(es[0], en[1], es[2], n, n * m) + m * n**2
    dz = _combine(es[0], es[1], en[2], n, n * n) + 2 * m * n**2
    tables["D"] = np.concatenate([dx, dy, dz], axis=1)

    tables["S"] = _combine(es[0], es[1], es[2], n, n * n)
    return tables


def _axis_grids(*sizes):
    """Index grids over a tensor range, first argument running fastest."""
    ranges = [np.arange(s) for s in sizes]
    grids = np.meshgrid(*ranges[::-1], indexing="ij")[::-1]
    return [g.ravel() for g in grids]


def _boundary_mask_C(n):
    m = n + 1
    mask = np.zeros(3 * n * m**2, dtype=bool)
    s, j, k = _axis_grids(n, m, m)
    edge = (j == 0) | (j == n) | (k == 0) | (k == n)
    mask[s + n * j + n * m * k] = edge
    i, s, k = _axis_grids(m, n, m)
    edge = (i == 0) | (i == n) | (k == 0) | (k == n)
    mask[n * m**2 + i + m * s + m * n * k] = edge
    i, j, s = _axis_grids(m, m, n)
    edge = (i == 0) | (i == n) | (j == 0) | (j == n)
    mask[2 * n * m**2 + i + m * j + m * m * s] = edge
    return mask


def _incidence(n):
    """Integer matrices E_grad (C x G), C_curl (D x C), D_div (S x D)."""
    m = n + 1
    dim_G = m**3
    dim_C = 3 * n * m**2
    dim_D = 3 * m * n**2
    dim_S = n**3

    def matrix(rows, cols, vals, shape):
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=shape,
            dtype=np.int64,
        )

    # gradient: row of edge (s in axis a, nodes elsewhere) hits its two
    # endpoint nodes with -1 at s and +1 at s+1
    rows, cols, vals = [], [], []
    offs_C = [0, n * m**2, 2 * n * m**2]
    s, j, k = _axis_grids(n, m, m)
    r = s + n * j + n * m * k
    rows += [r, r]
    cols += [(s + 1) + m * j + m * m * k, s + m * j + m * m * k]
    vals += [np.ones_like(r), -np.ones_like(r)]
    i, s, k = _axis_grids(m, n, m)
    r = offs_C[1] + i + m * s + m * n * k
    rows += [r, r]
    cols += [i + m * (s + 1) + m * m * k, i + m * s + m * m * k]
    vals += [np.ones_like(r), -np.ones_like(r)]
    i, j, s = _axis_grids(m, m, n)
    r = offs_C[2] + i + m * j + m * m * s
    rows += [r, r]
    cols += [i + m * j + m * m * (s + 1), i + m * j + m * m * s]
    vals += [np.ones_like(r), -np.ones_like(r)]
    E_grad = matrix(rows, cols, vals, (dim_C, dim_G))

    # curl: the flux row of each face is the signed circulation of the
    # four edges bounding it, counterclockwise about the face normal
    rows, cols, vals = [], [], []
    offs_D = [0, m * n**2, 2 * m * n**2]

    def c_x(s, j, k):
        return offs_C[0] + s + n * j + n * m * k

    def c_y(i, s, k):
        return offs_C[1] + i + m * s + m * n * k

    def c_z(i, j, s):
        return offs_C[2] + i + m * j + m * m * s

    # x-faces (node i, segments sy, sz)
    i, sy, sz = _axis_grids(m, n, n)
    r = offs_D[0] + i + m * sy + m * n * sz
    one = np.ones_like(r)
    rows += [r] * 4
    cols += [c_y(i, sy, sz), c_z(i, sy + 1, sz), c_y(i, sy, sz + 1), c_z(i, sy, sz)]
    vals += [one, one, -one, -one]
    # y-faces (segment sx, node j, segment sz)
    sx, j, sz = _axis_grids(n, m, n)
    r = offs_D[1] + sx + n * j + n * m * sz
    one = np.ones_like(r)
    rows += [r] * 4
    cols += [c_z(sx, j, sz), c_x(sx, j, sz + 1), c_z(sx + 1, j, sz), c_x(sx, j, sz)]
    vals += [one, one, -one, -one]
    # z-faces (segments sx, sy, node k)
    sx, sy, k = _axis_grids(n, n, m)
    r = offs_D[2] + sx + n * sy + n * n * k
    one = np.ones_like(r)
    rows += [r] * 4
    cols += [c_x(sx, sy, k), c_y(sx + 1, sy, k), c_x(sx, sy + 1, k), c_y(sx, sy, k)]
    vals += [one, one, -one, -one]
    C_curl = matrix(rows, cols, vals, (dim_D, dim_C))

    # divergence: each cell row sums its six face fluxes outward
    s, t, u = _axis_grids(n, n, n)
    r = s + n * t + n * n * u
    one = np.ones_like(r)
    rows = [r] * 6
    cols = [
        offs_D[0] + (s + 1) + m * t + m * n * u,
        offs_D[0] + s + m * t + m * n * u,
        offs_D[1] + s + n * (t + 1) + n * m * u,
        offs_D[1] + s + n * t + n * m * u,
        offs_D[2] + s + n * t + n * n * (u + 1),
        offs_D[2] + s + n * t + n * n * u,
    ]
    vals = [one, -one, one, -one, one, -one]
    D_div = matrix(rows, cols, vals, (dim_S, dim_D))

    return E_grad, C_curl, D_div


# ----------------------------------------------------------------------
# reference basis tables and Piola evaluation
# ----------------------------------------------------------------------


def _tensor_scalar(fx, fy, fz):
    """Products f_x[a](q) f_y[b](q) f_z[c](q) flattened with a fastest."""
    out = np.einsum("aq,bq,cq->cbaq", fx, fy, fz)
    return out.reshape(-1, fx.shape[1])


def reference_values(complex_, space, xi):
    """Reference-cell basis values at points xi (no mapping applied).

    Scalar spaces return (n_local, n_points); vector spaces return
    (n_local, n_points, 3).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    nodes = complex_.nodes
    lx = lagrange_eval(nodes, xi[:, 0])
    ly = lagrange_eval(nodes, xi[:, 1])
    lz = lagrange_eval(nodes, xi[:, 2])
    ex = edge_eval(nodes, xi[:, 0])
    ey = edge_eval(nodes, xi[:, 1])
    ez = edge_eval(nodes, xi[:, 2])
    npts = xi.shape[0]

    if space == "G":
        return _tensor_scalar(lx, ly, lz)
    if space == "S":
        return _tensor_scalar(ex, ey, ez)
    if space in ("C", "C0"):
        comps = [
            _tensor_scalar(ex, ly, lz),
            _tensor_scalar(lx, ey, lz),
            _tensor_scalar(lx, ly, ez),
        ]
    elif space == "D":
        comps = [
            _tensor_scalar(lx, ey, ez),
            _tensor_scalar(ex, ly, ez),
            _tensor_scalar(ex, ey, lz),
        ]
    else:
        raise SpaceMismatch(f"unknown space {space!r}")
    n_local = sum(c.shape[0] for c in comps)
    out = np.zeros((n_local, npts, 3))
    start = 0
    for d, c in enumerate(comps):
        out[start : start + c.shape[0], :, d] = c
        start += c.shape[0]
    return out


def map_values(space, ref, geo):
    """Apply the Piola transform of `space` to reference values.

    ref is (n_local, n_points[, 3]); geo holds jac, det, jac_invT at the
    same points.  G pulls back values unchanged, C maps covariantly by
    J^{-T}, D contravariantly by J / det J, S scales by 1 / det J.
    """
    if space == "G":
        return ref
    if space == "S":
        return ref / geo.det[None, :]
    if space in ("C", "C0"):
        return np.einsum("qab,lqb->lqa", geo.jac_invT, ref)
    if space == "D":
        return np.einsum("qab,lqb->lqa", geo.jac, ref) / geo.det[None, :, None]
    raise SpaceMismatch(f"unknown space {space!r}")


def evaluate_basis(complex_, space, element, points):
    """Physical basis values of one element at chart points in [-1,1]^3."""
    xi = np.atleast_2d(np.asarray(points, dtype=float))
    ref = reference_values(complex_, space, xi)
    geo = element_geometry(complex_.mesh, element, xi)
    return BasisEvaluation(
        space=space, element=element, points=xi, values=map_values(space, ref, geo)
    )


# ----------------------------------------------------------------------
# boundary restriction
# ----------------------------------------------------------------------


def incidence_matrices(complex_):
    """The integer operators (E_grad, C_curl, D_div, C0_curl)."""
    return complex_.E_grad, complex_.C_curl, complex_.D_div, complex_.C0_curl


def restrict_boundary(complex_, field):
    """Drop the tangential boundary DOFs of a C field, landing in C0."""
    if field.space != "C":
        raise SpaceMismatch(f"restrict_boundary expects C, got {field.space!r}")
    return DiscreteField(
        "C0", field.coefficients[~complex_.boundary_mask], field.time_label
    )


def embed_boundary(complex_, field):
    """Zero-pad a C0 field back into C."""
    if field.space != "C0":
        raise SpaceMismatch(f"embed_boundary expects C0, got {field.space!r}")
    out = np.zeros(complex_.dim("C"))
    out[~complex_.boundary_mask] = field.coefficients
    return DiscreteField("C", out, field.time_label)


def build_complex(mesh, N):
    """Construct the discrete complex of degree N on `mesh`."""
    return DeRhamComplex(mesh, N)
