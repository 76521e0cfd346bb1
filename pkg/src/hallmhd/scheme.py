"""Leapfrog time integrator for the dual-field Hall-MHD system.

One iteration advances the primal fields with step 1 (a coupled linear
solve for u, omega, P, E, B, j, with the convection field and the dual
magnetic field frozen at known values) and then advances the dual field
H by half-step-centered step 2.  Both steps are linear by construction:
each iteration factorizes and solves exactly two sparse systems.  Every
frozen coefficient sits at the midpoint of the interval it serves: H
naturally lands there through the staggering, and the convection
vorticity is extrapolated there from its two latest known values, which
keeps the whole iteration second order in time.

The staggering puts u, omega, B, j at integer steps, H at half steps,
and P, E at the midpoint of the latest step-1 interval.  Initialization
computes omega and j by weak curls of the initial data and H at t =
dt/2 by a half-length step-2 solve frozen at the initial fields.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import (
    _assembly_data,
    _mapped_tables,
    cached_mass_matrix,
    field_at_quadrature,
    interpolate,
    load_vector,
    trilinear_matrix,
)
from .derham import DiscreteField
from .errors import ResidualTooLarge, SelfCheckFailed, SpaceMismatch
from .linalg import Factorization, compose, relative_residual, solve

# linear solves inside the time loop must be this good or the
# conservation and energy claims downstream are void
RESIDUAL_LIMIT = 1e-10

# ----------------------------------------------------------------------
# parameters and state
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeParams:
    """Time step, final time, and physical coefficients.

    ideal_mode forces the inverse Reynolds numbers to exactly zero so
    conservation tests are free of tiny-diffusion roundoff; R_f and R_m
    are ignored in that case.
    """

    dt: float
    T: float
    R_f: float = 1.0
    R_m: float = 1.0
    c_lorentz: float = 1.0
    h_hall: float = 1.0
    ideal_mode: bool = False

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.T <= 0.0:
            raise ValueError("T must be positive")
        if not self.ideal_mode and (self.R_f <= 0.0 or self.R_m <= 0.0):
            raise ValueError("Reynolds numbers must be positive")

    @property
    def inv_R_f(self):
        return 0.0 if self.ideal_mode else 1.0 / self.R_f

    @property
    def inv_R_m(self):
        return 0.0 if self.ideal_mode else 1.0 / self.R_m


@dataclass(frozen=True)
class SourceSpec:
    """Optional analytic sources: body force f and magnetic source m."""

    f: object = None
    m: object = None


@dataclass
class SimulationState:
    """All discrete fields after iteration k.

    u, B (space D) and omega, j (space C) sit at step k; H (space C0)
    at step k + 1/2; P (space S) and E (space C) at step k - 1/2.  P and
    E are None before the first iteration since the scheme never defines
    them at integer times.
    """

    k: int
    t: float
    u: DiscreteField
    omega: DiscreteField
    B: DiscreteField
    j: DiscreteField
    H: DiscreteField
    P: DiscreteField | None = None
    E: DiscreteField | None = None
    # previous-step vorticity, kept for the convection extrapolant; None
    # before the first iteration
    omega_prev: DiscreteField | None = None


# ----------------------------------------------------------------------
# cached operators
# ----------------------------------------------------------------------


def operators(complex_):
    """Frozen-field-independent matrices, assembled once per complex."""
    key = "scheme_ops"
    if key in complex_.cache:
        return complex_.cache[key]
    M_D = cached_mass_matrix(complex_, "D")
    M_C = cached_mass_matrix(complex_, "C")
    M_C0 = cached_mass_matrix(complex_, "C0")
    M_S = cached_mass_matrix(complex_, "S")
    C = complex_.C_curl.astype(float).tocsr()
    C0 = complex_.C0_curl.astype(float).tocsr()
    D = complex_.D_div.astype(float).tocsr()
    MD_C = (M_D @ C).tocsr()
    MS_D = (M_S @ D).tocsr()
    ops = {
        "M_D": M_D,
        "M_C": M_C,
        "M_C0": M_C0,
        "M_S": M_S,
        "C0": C0,
        "MD_C": MD_C,
        "CT_MD": MD_C.T.tocsr(),
        "MS_D": MS_D,
        "DT_MS": MS_D.T.tocsr(),
        "CC0": (C0.T @ M_D @ C0).tocsr(),
    }
    complex_.cache[key] = ops
    return ops


def _checked_solve(A, b, what, solver="direct"):
    if solver == "direct":
        lu = Factorization(A)
        x = lu.solve(b)
        res = relative_residual(A, x, b)
    else:
        x, res = solve(A, b, method=solver)
    if res > RESIDUAL_LIMIT:
        raise ResidualTooLarge(
            "%s solve residual %.3e exceeds %.1e" % (what, res, RESIDUAL_LIMIT)
        )
    return x, res


# ----------------------------------------------------------------------
# initialization
# ----------------------------------------------------------------------


def _require(field, space, name):
    if field.space != space:
        raise SpaceMismatch(
            "%s must be in space %s, got %s" % (name, space, field.space)
        )


def init_omega(complex_, u0):
    """Weak curl of the initial velocity: M_C omega0 = C^T M_D u0."""
    _require(u0, "D", "u0")
    ops = operators(complex_)
    x, _ = _checked_solve(ops["M_C"], ops["CT_MD"] @ u0.coefficients, "omega0")
    return DiscreteField("C", x, 0.0)


def init_j(complex_, B0):
    """Weak curl of the initial magnetic field: M_C j0 = C^T M_D B0."""
    _require(B0, "D", "B0")
    ops = operators(complex_)
    x, _ = _checked_solve(ops["M_C"], ops["CT_MD"] @ B0.coefficients, "j0")
    return DiscreteField("C", x, 0.0)


def project_C0(complex_, field_d):
    """L2 projection of a D field into C0.

    Default initializer for H when only discrete initial data exists;
    analytic initial conditions should be interpolated directly instead.
    """
    _require(field_d, "D", "field")
    data = _assembly_data(complex_, complex_.N + 2)
    vals = field_at_quadrature(complex_, field_d, data)
    Vc = _mapped_tables(complex_, "C", data)
    local = np.einsum("eaqc,eqc,eq->ea", Vc, vals, data["wdet"])
    vec = np.zeros(complex_.dim("C"))
    np.add.at(vec, complex_.dof_table("C"), local)
    vec = vec[~complex_.boundary_mask]
    x, _ = _checked_solve(operators(complex_)["M_C0"], vec, "H0 projection")
    return DiscreteField("C0", x, 0.0)


def _advance_H(complex_, params, u_field, B_field, H_old, dt_eff, t_source,
               sources, solver="direct"):
    """Shared core of step 2 and the initialization half step.

    Solves the midpoint-centered H system over an interval of length
    dt_eff with the primal fields frozen at u_field, B_field and the
    magnetic source evaluated at the interval midpoint t_source.
    """
    ops = operators(complex_)
    A_u = trilinear_matrix(complex_, "A_u", u_field)
    A_B = trilinear_matrix(complex_, "A_B", B_field)
    C0T = ops["C0"].T
    stiff = (
        0.5 * params.inv_R_m * ops["CC0"]
        - 0.5 * (C0T @ A_u)
        + 0.5 * params.h_hall * (C0T @ A_B)
    ).tocsr()
    idt = 1.0 / dt_eff
    left = (idt * ops["M_C0"] + stiff).tocsr()
    rhs = (idt * ops["M_C0"] - stiff) @ H_old.coefficients
    if sources is not None and sources.m is not None:
        rhs = rhs + load_vector(complex_, sources.m, t_source, "C0")
    return _checked_solve(left, rhs, "H", solver)


def init_H_half(complex_, H0, u0, B0, params, sources=None, solver="direct"):
    """Advance H from t=0 to t=dt/2 with frozen initial primal fields."""
    _require(H0, "C0", "H0")
    _require(u0, "D", "u0")
    _require(B0, "D", "B0")
    x, _ = _advance_H(
        complex_, params, u0, B0, H0, 0.5 * params.dt, 0.25 * params.dt,
        sources, solver
    )
    return DiscreteField("C0", x, 0.5)


# ----------------------------------------------------------------------
# the two steps
# ----------------------------------------------------------------------


def _convection_field(state):
    """Known vorticity extrapolated to the step-1 interval midpoint.

    The convection matrix must be frozen at a known field to keep step 1
    linear.  Freezing at omega^{k-1} alone costs a temporal order, so
    the two latest known vorticities extrapolate to t^{k-1/2} via
    1.5 omega^{k-1} - 0.5 omega^{k-2}.  The first iteration has no
    omega^{k-2} and falls back to omega^0; the conservation and energy
    properties hold for any frozen field here by the skew-symmetry of
    the trilinear form, so only accuracy depends on this choice.
    """
    if state.omega_prev is None:
        return state.omega
    star = (
        1.5 * state.omega.coefficients - 0.5 * state.omega_prev.coefficients
    )
    return DiscreteField("C", star, state.omega.time_label + 0.5)


def step1(complex_, state, params, sources=None, solver="direct"):
    """Advance the primal fields by one step.

    Solves the coupled 6-block system for (u, omega, P, E, B, j) with
    the convection field frozen at the midpoint vorticity extrapolant
    and the Lorentz/Ohm coupling frozen at H^{k-1/2}.  The body force
    and magnetic source are evaluated at the interval midpoint; the
    magnetic source enters through its canonical D interpolant so that
    it cannot feed the divergence of B.

    Returns (new_state, info); info carries the solver residual and the
    body-force moment vector for the energy-law residual downstream.
    """
    ops = operators(complex_)
    dt = params.dt
    idt = 1.0 / dt
    t_mid = state.t + 0.5 * dt
    u0 = state.u.coefficients
    w0 = state.omega.coefficients
    B0 = state.B.coefficients
    j0 = state.j.coefficients

    A_w = trilinear_matrix(complex_, "A_omega", _convection_field(state))
    A_h = trilinear_matrix(complex_, "A_H", state.H)
    AA_h = trilinear_matrix(complex_, "AA_H", state.H)
    AhT = A_h.T.tocsr()

    M_D, M_C = ops["M_D"], ops["M_C"]
    half_rf = 0.5 * params.inv_R_f
    half_c = 0.5 * params.c_lorentz
    ohm_j = (0.5 * params.inv_R_m) * M_C + (0.5 * params.h_hall) * AA_h

    blocks = [
        [idt * M_D + 0.5 * A_w, half_rf * ops["MD_C"], -ops["DT_MS"],
         None, None, -half_c * A_h],
        [-ops["CT_MD"], M_C, None, None, None, None],
        [ops["MS_D"], None, None, None, None, None],
        [None, None, None, None, -ops["CT_MD"], M_C],
        [None, None, None, ops["MD_C"], idt * M_D, None],
        [0.5 * AhT, None, None, -M_C, None, ohm_j],
    ]

    f_vec = np.zeros(complex_.dim("D"))
    if sources is not None and sources.f is not None:
        f_vec = load_vector(complex_, sources.f, t_mid, "D")
    r1 = (
        idt * (M_D @ u0)
        - 0.5 * (A_w @ u0)
        - half_rf * (ops["MD_C"] @ w0)
        + half_c * (A_h @ j0)
        + f_vec
    )
    r5 = idt * (M_D @ B0)
    if sources is not None and sources.m is not None:
        m_interp = interpolate(complex_, "D", sources.m, t_mid)
        r5 = r5 + M_D @ m_interp.coefficients
    r6 = -0.5 * (AhT @ u0) - ohm_j @ j0
    rhs = [
        r1,
        np.zeros(complex_.dim("C")),
        np.zeros(complex_.dim("S")),
        np.zeros(complex_.dim("C")),
        r5,
        r6,
    ]

    A, b = compose(blocks, rhs)
    x, res = _checked_solve(A, b, "step 1", solver)

    nD, nC, nS = complex_.dim("D"), complex_.dim("C"), complex_.dim("S")
    parts = np.split(x, np.cumsum([nD, nC, nS, nC, nD]))
    u1, w1, P1, E1, B1, j1 = parts

    scale_u = max(1.0, abs(u1).max())
    div_u = abs(complex_.D_div @ u1).max()
    if div_u > 1e-11 * scale_u:
        raise SelfCheckFailed(
            "div u = %.3e after step 1 (scale %.3e)" % (div_u, scale_u)
        )
    scale_B = max(1.0, abs(B1).max())
    div_drift = abs(complex_.D_div @ (B1 - B0)).max()
    if div_drift > 1e-11 * scale_B:
        raise SelfCheckFailed(
            "div B drifted by %.3e over step 1 (scale %.3e)"
            % (div_drift, scale_B)
        )

    k1 = state.k + 1
    t1 = state.t + dt
    new = SimulationState(
        k=k1,
        t=t1,
        u=DiscreteField("D", u1, float(k1)),
        omega=DiscreteField("C", w1, float(k1)),
        B=DiscreteField("D", B1, float(k1)),
        j=DiscreteField("C", j1, float(k1)),
        H=state.H,
        P=DiscreteField("S", P1, k1 - 0.5),
        E=DiscreteField("C", E1, k1 - 0.5),
        omega_prev=state.omega,
    )
    info = {"residual": res, "f_moment": f_vec}
    return new, info


def step2(complex_, state, params, sources=None, solver="direct"):
    """Advance H from k - 1/2 to k + 1/2 with frozen u^k, B^k.

    The magnetic source is evaluated at t^k, the midpoint of the H
    interval.  Returns (new_state, info).
    """
    x, res = _advance_H(
        complex_, params, state.u, state.B, state.H, params.dt, state.t,
        sources, solver
    )
    new = SimulationState(
        k=state.k,
        t=state.t,
        u=state.u,
        omega=state.omega,
        B=state.B,
        j=state.j,
        H=DiscreteField("C0", x, state.k + 0.5),
        P=state.P,
        E=state.E,
        omega_prev=state.omega_prev,
    )
    return new, {"residual": res}


# ----------------------------------------------------------------------
# run loop and checkpoints
# ----------------------------------------------------------------------


def run(
    complex_,
    params,
    u0=None,
    B0=None,
    sources=None,
    H0=None,
    state=None,
    on_iteration=None,
    solver="direct",
):
    """Initialize (unless resuming) and iterate until t^{k+1/2} > T.

    Parameters
    ----------
    complex_ : DeRhamComplex
    params : SchemeParams
    u0, B0 : DiscreteField in D
        Initial data; ignored when `state` is given.
    sources : SourceSpec or None
    H0 : DiscreteField in C0 or None
        Initial dual field; defaults to the L2 projection of B0.
    state : SimulationState or None
        Resume point (typically from load_state); skips initialization.
    on_iteration : callable(state, record) or None
    solver : {"direct", "iterative"}
        Passed to every step solve; initialization mass solves stay
        direct either way since they are small and symmetric.

    Returns
    -------
    state : SimulationState
    records : list of DiagnosticsRecord
        One entry per iteration performed by this call.
    """
    from .diagnostics import make_record

    if state is None:
        if u0 is None or B0 is None:
            raise ValueError("initial u0 and B0 are required without a state")
        _require(u0, "D", "u0")
        _require(B0, "D", "B0")
        div_u0 = abs(complex_.D_div @ u0.coefficients).max()
        if div_u0 > 1e-12:
            warnings.warn(
                "initial velocity has divergence %.3e; the discrete energy "
                "law only holds from the second iteration" % div_u0
            )
        omega0 = init_omega(complex_, u0)
        j0 = init_j(complex_, B0)
        if H0 is None:
            H0 = project_C0(complex_, B0)
        else:
            _require(H0, "C0", "H0")
        H_half = init_H_half(complex_, H0, u0, B0, params, sources, solver)
        state = SimulationState(
            k=0,
            t=0.0,
            u=DiscreteField("D", u0.coefficients, 0.0),
            omega=omega0,
            B=DiscreteField("D", B0.coefficients, 0.0),
            j=j0,
            H=H_half,
        )

    records = []
    while (state.k + 0.5) * params.dt <= params.T:
        prev = state
        mid, info1 = step1(complex_, prev, params, sources, solver)
        state, info2 = step2(complex_, mid, params, sources, solver)
        record = make_record(complex_, prev, state, params, info1, info2)
        records.append(record)
        if on_iteration is not None:
            on_iteration(state, record)
    return state, records


def save_state(path, state):
    """Write a checkpoint; resuming from it is bit-identical."""
    empty = np.zeros(0)
    np.savez(
        path,
        k=state.k,
        t=state.t,
        u=state.u.coefficients,
        omega=state.omega.coefficients,
        B=state.B.coefficients,
        j=state.j.coefficients,
        H=state.H.coefficients,
        P=empty if state.P is None else state.P.coefficients,
        E=empty if state.E is None else state.E.coefficients,
        omega_prev=(
            empty if state.omega_prev is None
            else state.omega_prev.coefficients
        ),
    )


def load_state(complex_, path):
    """Rebuild a SimulationState from a checkpoint file."""
    with np.load(path) as data:
        k = int(data["k"])
        t = float(data["t"])
        state = SimulationState(
            k=k,
            t=t,
            u=DiscreteField("D", data["u"], float(k)),
            omega=DiscreteField("C", data["omega"], float(k)),
            B=DiscreteField("D", data["B"], float(k)),
            j=DiscreteField("C", data["j"], float(k)),
            H=DiscreteField("C0", data["H"], k + 0.5),
            P=None if data["P"].size == 0 else DiscreteField("S", data["P"], k - 0.5),
            E=None if data["E"].size == 0 else DiscreteField("C", data["E"], k - 0.5),
            omega_prev=(
                None if "omega_prev" not in data.files
                or data["omega_prev"].size == 0
                else DiscreteField("C", data["omega_prev"], float(k - 1))
            ),
        )
    for name in ("u", "omega", "B", "j", "H"):
        field = getattr(state, name)
        expect = complex_.dim(field.space)
        if field.coefficients.size != expect:
            raise SpaceMismatch(
                "checkpoint %s has %d coefficients, complex expects %d"
                % (name, field.coefficients.size, expect)
            )
    return state
