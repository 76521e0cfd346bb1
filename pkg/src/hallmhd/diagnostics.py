"""Per-iteration monitored quantities: energies, dissipation, the discrete
energy-law residual, and pointwise divergence norms.

Everything here is a pure function of the simulation state, so repeated
evaluation is bit-identical.  The energy-law residual uses the exact
body-force moment vector the stepper assembled, not a re-quadrature;
the discrete law holds for that vector and would pick up spurious
residual from any other.
"""

import csv
from dataclasses import dataclass, fields

from .assembly import cached_mass_matrix


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One row of run diagnostics, written per iteration."""

    k: int
    t: float
    kinetic: float
    magnetic: float
    total: float
    dual_magnetic: float
    dissipation: float
    energy_residual: float
    div_u: float
    div_B: float
    div_jH: float
    residual1: float
    residual2: float


def _quadratic(M, x):
    return float(x @ (M @ x))


def energies(complex_, state, params):
    """Kinetic, magnetic, total, and dual magnetic energy of a state.

    The dual magnetic energy is reported only; no discrete law is
    asserted for it.
    """
    M_D = cached_mass_matrix(complex_, "D")
    M_C0 = cached_mass_matrix(complex_, "C0")
    kinetic = 0.5 * _quadratic(M_D, state.u.coefficients)
    magnetic = 0.5 * params.c_lorentz * _quadratic(M_D, state.B.coefficients)
    dual = 0.5 * params.c_lorentz * _quadratic(M_C0, state.H.coefficients)
    return kinetic, magnetic, kinetic + magnetic, dual


def dissipation(complex_, prev, new, params):
    """Viscous plus resistive dissipation of the step from prev to new.

    Uses the step-midpoint averages, matching the discrete energy law.
    """
    M_C = cached_mass_matrix(complex_, "C")
    wbar = 0.5 * (prev.omega.coefficients + new.omega.coefficients)
    jbar = 0.5 * (prev.j.coefficients + new.j.coefficients)
    return params.inv_R_f * _quadratic(M_C, wbar) + (
        params.c_lorentz * params.inv_R_m * _quadratic(M_C, jbar)
    )


def energy_law_residual(complex_, prev, new, params, f_moment=None):
    """Absolute residual of the discrete energy law over one step.

    The law balances the energy difference against dissipation and the
    body-force work; it assumes a zero magnetic source, so on runs with
    one this number is informational only.
    """
    _, _, e_prev, _ = energies(complex_, prev, params)
    _, _, e_new, _ = energies(complex_, new, params)
    ubar = 0.5 * (prev.u.coefficients + new.u.coefficients)
    work = float(f_moment @ ubar) if f_moment is not None else 0.0
    rate = (e_new - e_prev) / params.dt
    return abs(rate + dissipation(complex_, prev, new, params) - work)


def _div_curl_H(complex_):
    # divergence of the integer curl, composed in exact integer
    # arithmetic; the product is the zero matrix, which is the point
    key = "div_curl_H"
    if key not in complex_.cache:
        Z = (complex_.D_div @ complex_.C0_curl).tocsr()
        Z.eliminate_zeros()
        complex_.cache[key] = Z
    return complex_.cache[key]


def divergence_norms(complex_, state):
    """Max norms of div u, div B, and div of the curl of H."""
    D = complex_.D_div
    du = abs(D @ state.u.coefficients).max()
    dB = abs(D @ state.B.coefficients).max()
    djH = abs(_div_curl_H(complex_) @ state.H.coefficients).max(initial=0.0)
    return float(du), float(dB), float(djH)


def make_record(complex_, prev, new, params, info1, info2):
    """Bundle all monitored quantities for one completed iteration."""
    kinetic, magnetic, total, dual = energies(complex_, new, params)
    du, dB, djH = divergence_norms(complex_, new)
    return DiagnosticsRecord(
        k=new.k,
        t=new.t,
        kinetic=kinetic,
        magnetic=magnetic,
        total=total,
        dual_magnetic=dual,
        dissipation=dissipation(complex_, prev, new, params),
        energy_residual=energy_law_residual(
            complex_, prev, new, params, info1.get("f_moment")
        ),
        div_u=du,
        div_B=dB,
        div_jH=djH,
        residual1=info1["residual"],
        residual2=info2["residual"],
    )


def write_diagnostics_csv(records, path):
    """One header row plus one row per iteration.

    Floats are written with repr, which round-trips exactly, so two runs
    of the same configuration produce byte-identical files.
    """
    names = [f.name for f in fields(DiagnosticsRecord)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for rec in records:
            writer.writerow([repr(getattr(rec, name)) for name in names])
