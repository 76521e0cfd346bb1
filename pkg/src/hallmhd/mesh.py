"""Hexahedral meshes of a box domain with an optional nonlinear distortion.

A uniform K x K x K mesh is generated on the unit cube and pushed through
a global mapping into the physical box.  The "crazy" mapping displaces
every unit-cube point r by the same amount in all three directions,

    Psi(r) = r + (c/2) sin(2 pi r1) sin(2 pi r2) sin(2 pi r3) * (1, 1, 1),

which distorts element interiors while keeping boundary faces on the
boundary.  Each element carries the chart xi in [-1,1]^3; Jacobians of
the composed map are evaluated from closed-form derivatives.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .errors import NonPositiveJacobian

# corner offsets of one hexahedron, in the usual VTK ordering
_CORNERS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=float,
)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box [lo_d, hi_d]^3."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("lo and hi must each hold 3 coordinates")
        if not np.all(hi > lo):
            raise ValueError(f"domain must have hi > lo per axis, got {lo} .. {hi}")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def lengths(self):
        return np.asarray(self.hi) - np.asarray(self.lo)


@dataclass(frozen=True)
class MappingSpec:
    """Mesh mapping choice: 'identity-affine' or 'crazy' with amplitude c."""

    kind: str = "identity-affine"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity-affine", "crazy"):
            raise ValueError(f"unknown mapping kind {self.kind!r}")


@dataclass(frozen=True)
class QuadratureRule:
    """1D Gauss-Legendre abscissae and weights on [-1, 1]."""

    points: np.ndarray
    weights: np.ndarray


def gauss_rule(n):
    """The n-point Gauss-Legendre rule on [-1, 1] (exact to degree 2n-1)."""
    if n < 1:
        raise ValueError(f"need at least one point, got {n}")
    points, weights = legendre.leggauss(n)
    return QuadratureRule(points, weights)


def tensor_points(rule_x, rule_y, rule_z):
    """Tensor grid of three 1D rules, x index running fastest.

    Returns (points, weights) with points of shape (n, 3).
    """
    px, py, pz = rule_x.points, rule_y.points, rule_z.points
    wx, wy, wz = rule_x.weights, rule_y.weights, rule_z.weights
    Z, Y, X = np.meshgrid(pz, py, px, indexing="ij")
    WZ, WY, WX = np.meshgrid(wz, wy, wx, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])
    return pts, (WZ * WY * WX).ravel()


def _as_rule3(rule3d):
    """Accept one QuadratureRule (used in all directions) or a triple."""
    if isinstance(rule3d, QuadratureRule):
        return (rule3d, rule3d, rule3d)
    rx, ry, rz = rule3d
    return (rx, ry, rz)


@dataclass
class ElementGeometry:
    """Mapped data at a set of element points.

    xyz : (n, 3) physical coordinates
    jac : (n, 3, 3) Jacobian d x / d xi of the chart xi in [-1,1]^3
    det : (n,) determinants, all positive
    jac_invT : (n, 3, 3) inverse transposes
    """

    xyz: np.ndarray
    jac: np.ndarray
    det: np.ndarray
    jac_invT: np.ndarray


@dataclass
class HexMesh:
    """Uniform K^3 hexahedral mesh of `domain` under `mapping`.

    elements : (K^3, 3) integer triples (ex, ey, ez), ex fastest
    vertices : (K^3, 8, 3) physical corner coordinates (VTK corner order)
    """

    K: int
    domain: BoxDomain
    mapping: MappingSpec
    elements: np.ndarray = field(init=False, repr=False)
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        K = self.K
        idx = np.arange(K**3)
        self.elements = np.column_stack([idx % K, (idx // K) % K, idx // K**2])
        corners_ref = (self.elements[:, None, :] + _CORNERS[None, :, :]) / K
        self.vertices = _apply_map(self, corners_ref.reshape(-1, 3)).reshape(K**3, 8, 3)

    @property
    def n_elements(self):
        return self.K**3


def _psi_and_grad(mapping, r):
    """The unit-cube mapping Psi(r) and the gradient of its offset F.

    r has shape (n, 3); returns (psi (n,3), gradF (n,3)).
    """
    if mapping.kind == "crazy" and mapping.c != 0.0:
        two_pi = 2.0 * np.pi
        s = np.sin(two_pi * r)
        c = np.cos(two_pi * r)
        F = 0.5 * mapping.c * s[:, 0] * s[:, 1] * s[:, 2]
        g = np.empty_like(r)
        g[:, 0] = np.pi * mapping.c * c[:, 0] * s[:, 1] * s[:, 2]
        g[:, 1] = np.pi * mapping.c * s[:, 0] * c[:, 1] * s[:, 2]
        g[:, 2] = np.pi * mapping.c * s[:, 0] * s[:, 1] * c[:, 2]
        return r + F[:, None], g
    return r.copy(), np.zeros_like(r)


def _apply_map(mesh, r):
    """Physical coordinates of unit-cube points r, shape (n, 3)."""
    psi, _ = _psi_and_grad(mesh.mapping, np.asarray(r, dtype=float))
    lo = np.asarray(mesh.domain.lo)
    return lo + mesh.domain.lengths * psi


def _geometry_at(mesh, r):
    """Map + Jacobian data at unit-cube points r for the xi-chart.

    The chart Jacobian is J[d, a] = (L_d / (2K)) (delta_da + dF/dr_a),
    so det J = prod_d (L_d / (2K)) * (1 + sum_a dF/dr_a).
    """
    r = np.asarray(r, dtype=float)
    psi, g = _psi_and_grad(mesh.mapping, r)
    L = mesh.domain.lengths
    scale = L / (2.0 * mesh.K)
    n = r.shape[0]
    jac = np.zeros((n, 3, 3))
    for d in range(3):
        jac[:, d, d] = scale[d]
        for a in range(3):
            jac[:, d, a] += scale[d] * g[:, a]
    det = np.prod(scale) * (1.0 + g.sum(axis=1))
    xyz = np.asarray(mesh.domain.lo) + L * psi
    return xyz, jac, det


def element_geometry(mesh, element, xi):
    """Geometry of one element at chart points xi, shape (n, 3) in [-1,1]^3.

    Raises NonPositiveJacobian if any determinant is nonpositive.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    e = mesh.elements[element]
    r = (e + (xi + 1.0) / 2.0) / mesh.K
    xyz, jac, det = _geometry_at(mesh, r)
    bad = np.nonzero(det <= 0.0)[0]
    if bad.size:
        q = bad[0]
        raise NonPositiveJacobian(element, tuple(xi[q]), det[q])
    jac_invT = np.linalg.inv(jac).transpose(0, 2, 1)
    return ElementGeometry(xyz=xyz, jac=jac, det=det, jac_invT=jac_invT)


def jacobian_data(mesh, element, rule3d):
    """Geometry of one element at the tensor points of `rule3d`."""
    rx, ry, rz = _as_rule3(rule3d)
    xi, _ = tensor_points(rx, ry, rz)
    return element_geometry(mesh, element, xi)


def geometry_all(mesh, rule3d):
    """ElementGeometry stacked over all elements, shapes (n_elem, nqp, ...).

    One vectorized evaluation; used by the assembly routines.
    """
    rx, ry, rz = _as_rule3(rule3d)
    xi, _ = tensor_points(rx, ry, rz)
    return geometry_at_all(mesh, xi)


def geometry_at_all(mesh, xi):
    """Geometry of every element at the same chart points xi (n, 3)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    nqp = xi.shape[0]
    r = (mesh.elements[:, None, :] + (xi[None, :, :] + 1.0) / 2.0) / mesh.K
    xyz, jac, det = _geometry_at(mesh, r.reshape(-1, 3))
    bad = np.nonzero(det <= 0.0)[0]
    if bad.size:
        q = bad[0]
        raise NonPositiveJacobian(int(q // nqp), tuple(xi[q % nqp]), det[q])
    jac_invT = np.linalg.inv(jac).transpose(0, 2, 1)
    ne = mesh.n_elements
    return ElementGeometry(
        xyz=xyz.reshape(ne, nqp, 3),
        jac=jac.reshape(ne, nqp, 3, 3),
        det=det.reshape(ne, nqp),
        jac_invT=jac_invT.reshape(ne, nqp, 3, 3),
    )


def build_mesh(K, domain, mapping=None):
    """Build the K^3 mesh and verify the mapping is orientation preserving.

    The determinant is sampled at a 5-point Gauss tensor grid in every
    element; a nonpositive value raises NonPositiveJacobian.
    """
    mesh = HexMesh(K=K, domain=domain, mapping=mapping or MappingSpec())
    geometry_all(mesh, gauss_rule(5))
    return mesh
