"""Metric-dependent assembly: mass matrices, trilinear matrices, moments,
and canonical interpolation.

Everything here integrates Piola-mapped basis functions with tensor
Gauss quadrature.  The default assembly rule uses N+2 points per
direction, which is inexact on distorted elements by design; the
conservation structure of the scheme must not (and does not) rely on
exact integration.  Canonical interpolation uses a richer rule so that
reduced divergence-free fields are divergence free to near roundoff.
"""

import numpy as np
import scipy.sparse as sp

from .derham import DiscreteField, embed_boundary, reference_values
from .errors import SpaceMismatch
from .mesh import gauss_rule, geometry_all, geometry_at_all, tensor_points

# trilinear matrix layouts: rows are always the test space of the block
# equation the matrix appears in. "first"/"middle" say which slot of
# (a x b) . c the frozen field occupies; the remaining slots are
# column-basis then row-basis.  A_B is the composition of a D x D form
# with the integer curl, so that its column space is C0 while the cross
# product pairs two flux fields.
_TRILINEAR = {
    "A_omega": dict(frozen="C", rows="D", cols="D", pattern="first"),
    "A_H": dict(frozen="C", rows="D", cols="C", pattern="middle"),
    "AA_H": dict(frozen="C", rows="C", cols="C", pattern="middle"),
    "A_u": dict(frozen="D", rows="D", cols="C0", pattern="first"),
    "A_B": dict(frozen="D", rows="D", cols="D", pattern="middle", compose_curl=True),
}


def _assembly_data(complex_, n_quad):
    """Cached geometry and mapped basis tables at the tensor Gauss rule."""
    key = ("assembly", n_quad)
    if key in complex_.cache:
        return complex_.cache[key]
    rule = gauss_rule(n_quad)
    xi, w = tensor_points(rule, rule, rule)
    geo = geometry_all(complex_.mesh, rule)
    data = {
        "xi": xi,
        "wdet": geo.det * w[None, :],
        "xyz": geo.xyz,
        "geo": geo,
        "tables": {},
    }
    complex_.cache[key] = data
    return data


def _mapped_tables(complex_, space, data):
    """Basis values of `space` mapped per element, (ne, nloc, nqp[, 3])."""
    if space == "C0":
        space = "C"
    if space in data["tables"]:
        return data["tables"][space]
    ref = reference_values(complex_, space, data["xi"])
    geo = data["geo"]
    if space == "G":
        V = np.broadcast_to(ref[None], (geo.det.shape[0],) + ref.shape)
    elif space == "S":
        V = ref[None, :, :] / geo.det[:, None, :]
    elif space == "C":
        V = np.einsum("eqab,lqb->elqa", geo.jac_invT, ref)
    elif space == "D":
        V = np.einsum("eqab,lqb->elqa", geo.jac, ref) / geo.det[:, None, :, None]
    else:
        raise SpaceMismatch(f"unknown space {space!r}")
    data["tables"][space] = V
    return V


def _scatter(complex_, rows_space, cols_space, local):
    # C0 blocks are assembled over the full C tables and restricted after
    rs = "C" if rows_space == "C0" else rows_space
    cs = "C" if cols_space == "C0" else cols_space
    t_row = complex_.dof_table(rs)
    t_col = complex_.dof_table(cs)
    ne, na, nb = local.shape
    rows = np.repeat(t_row, nb, axis=1).ravel()
    cols = np.tile(t_col, (1, na)).ravel()
    shape = (complex_.dim(rs), complex_.dim(cs))
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    keep = ~complex_.boundary_mask
    if rows_space == "C0":
        M = M[keep]
    if cols_space == "C0":
        M = M[:, keep]
    return M.tocsr()


def mass_matrix(complex_, space, n_quad=None):
    """Gram matrix of `space` under the L2 inner product of the domain.

    Each symmetric pair is assembled once and mirrored, so the result
    satisfies M == M.T exactly, not just to roundoff.
    """
    n_quad = n_quad or complex_.N + 2
    data = _assembly_data(complex_, n_quad)
    V = _mapped_tables(complex_, space, data)
    if V.ndim == 3:
        local = np.einsum("eaq,ebq,eq->eab", V, V, data["wdet"])
    else:
        local = np.einsum("eaqc,ebqc,eq->eab", V, V, data["wdet"])
    table = complex_.dof_table(space)
    ia, ib = np.triu_indices(local.shape[1])
    rows = table[:, ia].ravel()
    cols = table[:, ib].ravel()
    lo = np.minimum(rows, cols)
    hi = np.maximum(rows, cols)
    dim = complex_.dim("C") if space == "C0" else complex_.dim(space)
    upper = sp.coo_matrix(
        (local[:, ia, ib].ravel(), (lo, hi)), shape=(dim, dim)
    ).tocsr()
    M = (upper + sp.triu(upper, 1).T).tocsr()
    if space == "C0":
        keep = ~complex_.boundary_mask
        M = M[keep][:, keep].tocsr()
    return M


def cached_mass_matrix(complex_, space):
    """mass_matrix with per-complex caching (the stepper reuses these)."""
    key = ("mass", space)
    if key not in complex_.cache:
        complex_.cache[key] = mass_matrix(complex_, space)
    return complex_.cache[key]


def field_at_quadrature(complex_, field, data):
    """Evaluate a discrete field at the cached quadrature points."""
    if field.space == "C0":
        field = embed_boundary(complex_, field)
    V = _mapped_tables(complex_, field.space, data)
    g = field.coefficients[complex_.dof_table(field.space)]
    if V.ndim == 3:
        return np.einsum("eaq,ea->eq", V, g)
    return np.einsum("eaqc,ea->eqc", V, g)


def trilinear_matrix(complex_, kind, frozen, n_quad=None):
    """Matrix of the cross-product form with one slot frozen.

    Entry (a, b) integrates (alpha x beta) . gamma where gamma is the
    row-space basis a, and the frozen field and column basis b fill the
    first two slots in the order given by the kind's pattern.
    """
    if kind not in _TRILINEAR:
        raise SpaceMismatch(f"unknown trilinear kind {kind!r}")
    info = _TRILINEAR[kind]
    want = info["frozen"]
    have = "C" if frozen.space == "C0" else frozen.space
    if have != want:
        raise SpaceMismatch(
            f"{kind} freezes a {want} field, got {frozen.space!r}"
        )
    n_quad = n_quad or complex_.N + 2
    data = _assembly_data(complex_, n_quad)
    W = field_at_quadrature(complex_, frozen, data)
    Ta = _mapped_tables(complex_, info["rows"], data)
    Tb = _mapped_tables(complex_, info["cols"], data)
    if info["pattern"] == "first":
        cross = np.cross(W[:, None, :, :], Tb)
    else:
        cross = np.cross(Tb, W[:, None, :, :])
    local = np.einsum("ebqc,eaqc,eq->eab", cross, Ta, data["wdet"])
    M = _scatter(complex_, info["rows"], info["cols"], local)
    if info.get("compose_curl"):
        M = (M @ complex_.C0_curl).tocsr()
    return M


def load_vector(complex_, f, t=0.0, space="D", n_quad=None):
    """Moments of an analytic field against the basis of `space`."""
    n_quad = n_quad or complex_.N + 2
    data = _assembly_data(complex_, n_quad)
    V = _mapped_tables(complex_, space, data)
    xyz = data["xyz"].reshape(-1, 3)
    F = np.asarray(f(xyz, t))
    if V.ndim == 3:
        F = F.reshape(V.shape[0], -1)
        local = np.einsum("eq,eaq,eq->ea", F, V, data["wdet"])
    else:
        F = F.reshape(V.shape[0], -1, 3)
        local = np.einsum("eqc,eaqc,eq->ea", F, V, data["wdet"])
    table = complex_.dof_table(space)
    dim_full = complex_.dim("C") if space == "C0" else complex_.dim(space)
    vec = np.zeros(dim_full)
    np.add.at(vec, table, local)
    if space == "C0":
        vec = vec[~complex_.boundary_mask]
    return vec


def evaluate_field(complex_, field, xi):
    """Values of a discrete field at chart points xi in every element.

    Returns (ne, npts) for scalar spaces, (ne, npts, 3) for vector ones.
    """
    space = "C" if field.space == "C0" else field.space
    if field.space == "C0":
        field = embed_boundary(complex_, field)
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    ref = reference_values(complex_, space, xi)
    geo = geometry_at_all(complex_.mesh, xi)
    g = field.coefficients[complex_.dof_table(space)]
    if space == "G":
        return np.einsum("aq,ea->eq", ref, g)
    if space == "S":
        return np.einsum("aq,ea->eq", ref, g) / geo.det
    if space == "C":
        vals = np.einsum("eqab,lqb,el->eqa", geo.jac_invT, ref, g)
    else:
        vals = np.einsum("eqab,lqb,el->eqa", geo.jac, ref, g)
        vals = vals / geo.det[:, :, None]
    return vals


# ----------------------------------------------------------------------
# canonical interpolation (reduction)
# ----------------------------------------------------------------------


def _segment_points(nodes, rule):
    """Gauss points and weights mapped into each node interval.

    Returns (pts, w) of shape (n_segments, n_quad); weights include the
    half-width factors.
    """
    a, b = nodes[:-1, None], nodes[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * rule.points[None, :]
    w = 0.5 * (b - a) * rule.weights[None, :]
    return pts, w


def _grids(*arrays):
    """meshgrid of index arrays, first argument slowest, flattened."""
    grids = np.meshgrid(*arrays, indexing="ij")
    return [g.ravel() for g in grids]


def interpolate(complex_, space, f, t=0.0, n_quad=None):
    """Reduce an analytic field onto `space` by its canonical DOFs.

    Point values for G, edge tangential integrals for C, face fluxes
    for D, cell integrals for S.  The quadrature (default N+10 points
    per direction) is deliberately rich: reduction then commutes with
    the incidence operators to near machine precision, so interpolating
    a divergence-free field gives a coefficient vector in the kernel of
    D_div up to roundoff.
    """
    N = complex_.N
    nodes = complex_.nodes
    mesh = complex_.mesh
    rule = gauss_rule(n_quad or N + 10)
    q = rule.points.size
    seg_pts, seg_w = _segment_points(nodes, rule)
    node_idx = np.arange(N + 1)
    seg_idx = np.arange(N)
    q_idx = np.arange(q)
    out_space = space
    if space == "C0":
        space = "C"
    vec = np.zeros(complex_.dim(space))
    table = complex_.dof_table(space)

    if space == "G":
        K, J, I = _grids(node_idx, node_idx, node_idx)
        xi = np.column_stack([nodes[I], nodes[J], nodes[K]])
        geo = geometry_at_all(mesh, xi)
        vals = np.asarray(f(geo.xyz.reshape(-1, 3), t)).reshape(geo.xyz.shape[:2])
        vec[table] = vals

    elif space == "C":
        # tangential line integrals: int F . (dx/dxi_d) over each segment
        layouts = [
            _grids(node_idx, node_idx, seg_idx, q_idx),  # x: (j, i, s, g)
            _grids(node_idx, seg_idx, node_idx, q_idx),  # y: (j, s, i, g)
            _grids(seg_idx, node_idx, node_idx, q_idx),  # z: (s, j, i, g)
        ]
        start = 0
        for d, axes in enumerate(layouts):
            slow, mid, fast, g = axes
            coords = [None, None, None]
            if d == 0:
                coords[0] = seg_pts[fast, g]
                coords[1] = nodes[mid]
                coords[2] = nodes[slow]
                w = seg_w[fast, g]
            elif d == 1:
                coords[0] = nodes[fast]
                coords[1] = seg_pts[mid, g]
                coords[2] = nodes[slow]
                w = seg_w[mid, g]
            else:
                coords[0] = nodes[fast]
                coords[1] = nodes[mid]
                coords[2] = seg_pts[slow, g]
                w = seg_w[slow, g]
            xi = np.column_stack(coords)
            geo = geometry_at_all(mesh, xi)
            F = np.asarray(f(geo.xyz.reshape(-1, 3), t)).reshape(geo.xyz.shape)
            tangent = geo.jac[:, :, :, d]
            integrand = np.einsum("epc,epc->ep", F, tangent)
            nloc = integrand.shape[1] // q
            coeffs = (integrand.reshape(-1, nloc, q) * w.reshape(nloc, q)).sum(axis=2)
            vec[table[:, start : start + nloc]] = coeffs
            start += nloc

    elif space == "D":
        # face fluxes: int int F . (dx/dxi_a x dx/dxi_b) per sub-face,
        # with (a, b) the cyclic successors of the face direction
        layouts = [
            _grids(seg_idx, seg_idx, node_idx, q_idx, q_idx),  # x: (t, s, i, gb, ga)
            _grids(seg_idx, node_idx, seg_idx, q_idx, q_idx),  # y: (t, i, s, gb, ga)
            _grids(node_idx, seg_idx, seg_idx, q_idx, q_idx),  # z: (i, t, s, gb, ga)
        ]
        start = 0
        for d, axes in enumerate(layouts):
            slow, mid, fast, gb, ga = axes
            da, db = (d + 1) % 3, (d + 2) % 3
            coords = [None, None, None]
            if d == 0:
                # ga runs along y, gb along z
                coords[0] = nodes[fast]
                coords[1] = seg_pts[mid, ga]
                coords[2] = seg_pts[slow, gb]
                w = seg_w[mid, ga] * seg_w[slow, gb]
            elif d == 1:
                # ga runs along z, gb along x
                coords[0] = seg_pts[fast, gb]
                coords[1] = nodes[mid]
                coords[2] = seg_pts[slow, ga]
                w = seg_w[fast, gb] * seg_w[slow, ga]
            else:
                # ga runs along x, gb along y
                coords[0] = seg_pts[fast, ga]
                coords[1] = seg_pts[mid, gb]
                coords[2] = nodes[slow]
                w = seg_w[fast, ga] * seg_w[mid, gb]
            xi = np.column_stack(coords)
            geo = geometry_at_all(mesh, xi)
            F = np.asarray(f(geo.xyz.reshape(-1, 3), t)).reshape(geo.xyz.shape)
            normal = np.cross(geo.jac[:, :, :, da], geo.jac[:, :, :, db])
            integrand = np.einsum("epc,epc->ep", F, normal)
            nloc = integrand.shape[1] // q**2
            coeffs = (integrand.reshape(-1, nloc, q**2) * w.reshape(nloc, q**2)).sum(
                axis=2
            )
            vec[table[:, start : start + nloc]] = coeffs
            start += nloc

    elif space == "S":
        U, T, S, Gz, Gy, Gx = _grids(seg_idx, seg_idx, seg_idx, q_idx, q_idx, q_idx)
        xi = np.column_stack([seg_pts[S, Gx], seg_pts[T, Gy], seg_pts[U, Gz]])
        w = seg_w[S, Gx] * seg_w[T, Gy] * seg_w[U, Gz]
        geo = geometry_at_all(mesh, xi)
        F = np.asarray(f(geo.xyz.reshape(-1, 3), t)).reshape(geo.det.shape)
        integrand = F * geo.det
        nloc = integrand.shape[1] // q**3
        coeffs = (integrand.reshape(-1, nloc, q**3) * w.reshape(nloc, q**3)).sum(axis=2)
        vec[table] = coeffs
    else:
        raise SpaceMismatch(f"unknown space {space!r}")

    field = DiscreteField(space, vec)
    if out_space == "C0":
        from .derham import restrict_boundary

        return restrict_boundary(complex_, field)
    return field
