"""Manufactured Hall-MHD solution family and error measurement.

The exact fields live on [0, 2pi]^3 and satisfy the homogeneous boundary
conditions P = 0, u x n = 0, B x n = 0 there.  Velocity, pressure and a
primed electric field E' are prescribed; B follows by integrating
-curl E' in time, j = curl B, and E comes from Ohm's law.  Because E and
E' differ, the induction equation picks up a magnetic source term
m = curl(E - E') next to the body force f from the momentum equation.

The curls and cross products below were derived offline with a computer
algebra system and hard-coded.  build_case() re-validates every derived
closure against finite-difference oracles at random space-time points
before returning, so a transcription slip cannot survive construction.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import _assembly_data, field_at_quadrature, interpolate
from .derham import build_complex
from .errors import SelfCheckFailed
from .mesh import BoxDomain, MappingSpec, build_mesh

TWO_PI = 2.0 * math.pi

# ----------------------------------------------------------------------
# exact fields
# ----------------------------------------------------------------------


def box_domain():
    """The [0, 2pi]^3 box every manufactured run uses."""
    return BoxDomain((0.0, 0.0, 0.0), (TWO_PI, TWO_PI, TWO_PI))


def _trig(points):
    x = points[..., 0]
    y = points[..., 1]
    z = points[..., 2]
    return np.sin(x), np.cos(x), np.sin(y), np.cos(y), np.sin(z), np.cos(z)


def _stack(a, b, c):
    return np.stack(np.broadcast_arrays(a, b, c), axis=-1)


def _u(points, t):
    sx, cx, sy, cy, sz, cz = _trig(points)
    return math.exp(t) * _stack(cx * sy * sz, sx * cy * sz, -2.0 * sx * sy * cz)


def _omega(points, t):
    # curl u; the z component cancels identically
    sx, cx, sy, cy, sz, cz = _trig(points)
    zero = np.zeros_like(sx)
    return 3.0 * math.exp(t) * _stack(-sx * cy * cz, cx * sy * cz, zero)


def _pressure(points, t):
    sx, cx, sy, cy, sz, cz = _trig(points)
    return math.exp(-t) * sx * sy * sz


def _grad_pressure(points, t):
    sx, cx, sy, cy, sz, cz = _trig(points)
    return math.exp(-t) * _stack(cx * sy * sz, sx * cy * sz, sx * sy * cz)


def _e_prime(points, t):
    sx, cx, sy, cy, sz, cz = _trig(points)
    return math.exp(t) * _stack(sx * cy, -sy * cz, -cx * sz)


def _b_spatial(points):
    # -curl of the spatial factor of E'
    sx, cx, sy, cy, sz, cz = _trig(points)
    return _stack(sy * sz, sx * sz, -sx * sy)


def _b(points, t):
    return (math.exp(t) - 1.0) * _b_spatial(points)


def _j(points, t):
    # curl B
    sx, cx, sy, cy, sz, cz = _trig(points)
    return (math.exp(t) - 1.0) * _stack(
        -sx * (cy + cz), sy * (cx + cz), sz * (cx - cy)
    )


def _curl_u_cross_b_spatial(points):
    # curl(u_spatial x B_spatial), derived offline
    sx, cx, sy, cy, sz, cz = _trig(points)
    sx2, sy2, sz2 = sx * sx, sy * sy, sz * sz
    return _stack(
        sx * (-2.0 * sy2 * sz2 - sy2 * cx * cz + 2.0 * sy2 + sz2 * cx * cy - sz2),
        sy * (-2.0 * sx2 * sz2 - sx2 * cy * cz + 2.0 * sx2 + sz2 * cx * cy - sz2),
        sz * (-4.0 * sx2 * sy2 - 2.0 * sx2 * cy * cz + sx2 - 2.0 * sy2 * cx * cz + sy2),
    )


def _curl_j_cross_b_spatial(points):
    # curl(j_spatial x B_spatial), derived offline
    sx, cx, sy, cy, sz, cz = _trig(points)
    return 2.0 * _stack(
        -(cy + cz) * sy * sz * cx,
        (cx + cz) * sx * sz * cy,
        (cy - cx) * sx * sy * cz,
    )


# ----------------------------------------------------------------------
# case construction
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ManufacturedCase:
    """Analytic closures for one manufactured run.

    Every closure takes (points, t) with points of shape (..., 3) and
    returns values of matching shape ((...,) for the scalar P).
    """

    inv_R_f: float
    inv_R_m: float
    c_lorentz: float
    h_hall: float
    u: object = field(repr=False, default=None)
    omega: object = field(repr=False, default=None)
    P: object = field(repr=False, default=None)
    B: object = field(repr=False, default=None)
    j: object = field(repr=False, default=None)
    E: object = field(repr=False, default=None)
    E_prime: object = field(repr=False, default=None)
    f: object = field(repr=False, default=None)
    m: object = field(repr=False, default=None)


def build_case(params, self_check=True):
    """Assemble the closures for the given physical parameters.

    Parameters
    ----------
    params : object
        Anything with attributes inv_R_f, inv_R_m, c_lorentz, h_hall
        (SchemeParams qualifies).
    self_check : bool
        Run the finite-difference validation (on by default).

    Returns
    -------
    ManufacturedCase
    """
    inv_rf = params.inv_R_f
    inv_rm = params.inv_R_m
    c = params.c_lorentz
    h = params.h_hall

    def E(points, t):
        jv = _j(points, t)
        return (
            inv_rm * jv
            - np.cross(_u(points, t), _b(points, t))
            + h * np.cross(jv, _b(points, t))
        )

    def f(points, t):
        # du/dt equals u itself (time factor e^t); curl omega = 3 u
        uv = _u(points, t)
        return (
            uv
            + np.cross(_omega(points, t), uv)
            + 3.0 * inv_rf * uv
            - c * np.cross(_j(points, t), _b(points, t))
            + _grad_pressure(points, t)
        )

    def m(points, t):
        et = math.exp(t)
        bhat = _b_spatial(points)
        return (
            et * bhat
            + 2.0 * inv_rm * (et - 1.0) * bhat
            - et * (et - 1.0) * _curl_u_cross_b_spatial(points)
            + h * (et - 1.0) ** 2 * _curl_j_cross_b_spatial(points)
        )

    case = ManufacturedCase(
        inv_R_f=inv_rf,
        inv_R_m=inv_rm,
        c_lorentz=c,
        h_hall=h,
        u=_u,
        omega=_omega,
        P=_pressure,
        B=_b,
        j=_j,
        E=E,
        E_prime=_e_prime,
        f=f,
        m=m,
    )
    if self_check:
        validate_case(case)
    return case


# ----------------------------------------------------------------------
# finite-difference validation
# ----------------------------------------------------------------------


def _fd_space(F, p, t, axis, h=1e-5):
    e = np.zeros(3)
    e[axis] = h
    return (np.asarray(F(p + e, t)) - np.asarray(F(p - e, t))) / (2.0 * h)


def _fd_time(F, p, t, h=1e-5):
    return (np.asarray(F(p, t + h)) - np.asarray(F(p, t - h))) / (2.0 * h)


def _fd_curl(F, p, t):
    dx = _fd_space(F, p, t, 0)
    dy = _fd_space(F, p, t, 1)
    dz = _fd_space(F, p, t, 2)
    return np.array([dy[2] - dz[1], dz[0] - dx[2], dx[1] - dy[0]])


def _fd_div(F, p, t):
    return sum(_fd_space(F, p, t, a)[a] for a in range(3))


def _fd_grad(F, p, t):
    return np.array([_fd_space(F, p, t, a) for a in range(3)])


def validate_case(case, n_points=20, tol=1e-6, seed=2718):
    """Check the derived closures against finite-difference oracles.

    Raises SelfCheckFailed when any residual exceeds tol at any of the
    sampled space-time points, or when a boundary condition is violated.
    """
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.1, TWO_PI - 0.1, size=(n_points, 3))
    times = rng.uniform(0.05, 1.0, size=n_points)

    def fail(name, value, p, t):
        raise SelfCheckFailed(
            "%s residual %.3e at point %s, t=%.4f" % (name, value, p, t)
        )

    for p, t in zip(pts, times):
        r = abs(_fd_div(case.u, p, t))
        if r > tol:
            fail("div u", r, p, t)
        r = np.max(np.abs(_fd_curl(case.u, p, t) - case.omega(p, t)))
        if r > tol:
            fail("omega - curl u", r, p, t)
        r = np.max(np.abs(_fd_curl(case.B, p, t) - case.j(p, t)))
        if r > tol:
            fail("j - curl B", r, p, t)
        r = np.max(np.abs(_fd_time(case.B, p, t) + _fd_curl(case.E_prime, p, t)))
        if r > tol:
            fail("dB/dt + curl E'", r, p, t)
        r = np.max(np.abs(case.B(p, 0.0)))
        if r > tol:
            fail("B at t=0", r, p, 0.0)
        mom = (
            _fd_time(case.u, p, t)
            + np.cross(case.omega(p, t), case.u(p, t))
            + case.inv_R_f * _fd_curl(case.omega, p, t)
            - case.c_lorentz * np.cross(case.j(p, t), case.B(p, t))
            + _fd_grad(case.P, p, t)
            - case.f(p, t)
        )
        r = np.max(np.abs(mom))
        if r > tol:
            fail("momentum balance", r, p, t)
        ind = _fd_time(case.B, p, t) + _fd_curl(case.E, p, t) - case.m(p, t)
        r = np.max(np.abs(ind))
        if r > tol:
            fail("induction balance", r, p, t)

    # boundary conditions: tangential velocity and magnetic traces and the
    # pressure vanish on all six faces of [0, 2pi]^3
    for axis in range(3):
        for side in (0.0, TWO_PI):
            n = np.zeros(3)
            n[axis] = 1.0
            for _ in range(4):
                p = rng.uniform(0.0, TWO_PI, size=3)
                p[axis] = side
                t = rng.uniform(0.0, 1.0)
                r = np.max(np.abs(np.cross(case.u(p, t), n)))
                if r > tol:
                    fail("u x n on boundary", r, p, t)
                r = np.max(np.abs(np.cross(case.B(p, t), n)))
                if r > tol:
                    fail("B x n on boundary", r, p, t)
                r = abs(case.P(p, t))
                if r > tol:
                    fail("P on boundary", r, p, t)


# ----------------------------------------------------------------------
# error norms and convergence sweeps
# ----------------------------------------------------------------------


def l2_error(complex_, field_h, exact, t=0.0, n_quad=None):
    """L2 norm of field_h minus the exact closure at time t.

    The quadrature defaults to two points more than the assembly rule so
    the error measurement does not inherit the assembly truncation.
    """
    if n_quad is None:
        n_quad = complex_.N + 4
    data = _assembly_data(complex_, n_quad)
    vals = field_at_quadrature(complex_, field_h, data)
    ex = np.asarray(exact(data["xyz"].reshape(-1, 3), t)).reshape(vals.shape)
    diff2 = (vals - ex) ** 2
    if diff2.ndim == 3:
        diff2 = diff2.sum(axis=-1)
    return float(np.sqrt(np.sum(diff2 * data["wdet"])))


@dataclass(frozen=True)
class ErrorReport:
    """Final-iteration L2 errors for one (N, K, dt) configuration."""

    N: int
    K: int
    dt: float
    errors: dict


def fit_orders(reports, axis):
    """Least-squares convergence order per variable across a sweep.

    Temporal sweeps fit against dt, spatial sweeps against the element
    size 2pi/K.  Degenerate sweeps (fewer than two distinct abscissae)
    return NaN for every variable rather than raising.
    """
    if axis == "temporal":
        xs = np.array([r.dt for r in reports])
    elif axis == "spatial":
        xs = np.array([TWO_PI / r.K for r in reports])
    else:
        raise ValueError("unknown sweep axis %r" % axis)
    variables = sorted(reports[0].errors)
    orders = {}
    degenerate = len(reports) < 2 or np.unique(xs).size < 2
    for var in variables:
        if degenerate:
            orders[var] = float("nan")
            continue
        errs = np.array([r.errors[var] for r in reports])
        slope = np.polyfit(np.log(xs), np.log(errs), 1)[0]
        orders[var] = float(slope)
    return orders


REFERENCE_RATIO = 3


def _mass_norm(M, a, b):
    d = a - b
    return float(np.sqrt(d @ (M @ d)))


def _temporal_errors(cx, params, dt, case, u0, B0, sources):
    """Time-discretization error of u, B, H for one step size.

    The deviation is measured against a reference run on the same mesh
    with step dt / REFERENCE_RATIO, which isolates the temporal error
    from the (fixed) spatial error.  The odd ratio makes the reference
    half-step grid contain t = T + dt/2, so H is compared at its own
    staggered time without interpolation; u and B are captured when the
    reference passes t = T.  Because the reference step shrinks
    proportionally with dt, the leading dt^2 term of the deviation keeps
    a dt-independent prefactor and the fitted slope is unbiased.
    """
    from .assembly import cached_mass_matrix
    from .scheme import run

    p = replace(params, dt=dt)
    state, _ = run(cx, p, u0, B0, sources)

    r = REFERENCE_RATIO
    dt_ref = dt / r
    steps_T = round(params.T / dt) * r
    p_ref = replace(params, dt=dt_ref, T=params.T + 0.5 * dt - 0.5 * dt_ref)
    captured = {}

    def grab(st, rec):
        if st.k == steps_T:
            captured["u"] = st.u.coefficients.copy()
            captured["B"] = st.B.coefficients.copy()

    ref, _ = run(cx, p_ref, u0, B0, sources, on_iteration=grab)
    assert abs(ref.H.time_label * dt_ref - (params.T + 0.5 * dt)) < 1e-12

    M_D = cached_mass_matrix(cx, "D")
    M_C0 = cached_mass_matrix(cx, "C0")
    return {
        "u": _mass_norm(M_D, state.u.coefficients, captured["u"]),
        "B": _mass_norm(M_D, state.B.coefficients, captured["B"]),
        "H": _mass_norm(M_C0, state.H.coefficients, ref.H.coefficients),
    }


def _spatial_errors(cx, params, dt, case, u0, B0, sources):
    """Final-iteration L2 errors against the exact closures."""
    from .scheme import run

    p = replace(params, dt=dt)
    state, _ = run(cx, p, u0, B0, sources)
    half = 0.5 * p.dt
    return {
        "u": l2_error(cx, state.u, case.u, state.t),
        "B": l2_error(cx, state.B, case.B, state.t),
        "H": l2_error(cx, state.H, case.B, state.t + half),
        "omega": l2_error(cx, state.omega, case.omega, state.t),
        "j": l2_error(cx, state.j, case.j, state.t),
        "P": l2_error(cx, state.P, case.P, state.t - half),
        "E": l2_error(cx, state.E, case.E, state.t - half),
    }


def convergence_sweep(axis, grid, params):
    """Run the scheme over a (N, K, dt) grid and fit convergence orders.

    Spatial sweeps report every variable's error against the exact
    solution; the spatial error dominates there because the grid holds
    dt small and fixed.  Temporal sweeps hold the mesh fixed, where the
    error against the exact solution saturates at the spatial error, so
    they instead measure u, B, H against a same-mesh reference run with
    a finer step (see _temporal_errors); those are the variables
    carrying a time derivative.

    Parameters
    ----------
    axis : {"temporal", "spatial"}
        Which abscissa the order fit uses, and thereby which error
        measurement applies.
    grid : iterable of (N, K, dt)
        One scheme run per entry, on [0, 2pi]^3 with an undistorted
        mesh.  Entries sharing (N, K) share one assembled complex.
    params : SchemeParams
        Physical parameters and final time; dt is overridden per entry.

    Returns
    -------
    reports : list of ErrorReport
    orders : dict
        Fitted order per variable (NaN for degenerate sweeps).
    """
    from .scheme import SourceSpec

    if axis == "temporal":
        measure = _temporal_errors
    elif axis == "spatial":
        measure = _spatial_errors
    else:
        raise ValueError("unknown sweep axis %r" % axis)

    case = build_case(params)
    sources = SourceSpec(f=case.f, m=case.m)
    setups = {}
    reports = []
    for N, K, dt in grid:
        if axis == "temporal" and abs(params.T / dt - round(params.T / dt)) > 1e-12:
            raise ValueError(
                "temporal sweep needs T to be an integer multiple of dt"
            )
        if (N, K) not in setups:
            mesh = build_mesh(K, box_domain(), MappingSpec("identity-affine"))
            cx = build_complex(mesh, N)
            u0 = interpolate(cx, "D", case.u, 0.0)
            B0 = interpolate(cx, "D", case.B, 0.0)
            setups[N, K] = (cx, u0, B0)
        cx, u0, B0 = setups[N, K]
        errors = measure(cx, params, dt, case, u0, B0, sources)
        reports.append(ErrorReport(N=N, K=K, dt=dt, errors=errors))
    return reports, fit_orders(reports, axis)
