"""Tests for the monitored quantities and the diagnostics CSV writer."""

import filecmp

import numpy as np
import pytest

from hallmhd.assembly import interpolate
from hallmhd.derham import build_complex
from hallmhd.diagnostics import (
    DiagnosticsRecord,
    divergence_norms,
    energies,
    energy_law_residual,
    write_diagnostics_csv,
)
from hallmhd.mesh import BoxDomain, MappingSpec, build_mesh
from hallmhd.scheme import SchemeParams, SimulationState

UNIT = BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
PARAMS = SchemeParams(dt=0.1, T=1.0, c_lorentz=2.0)


@pytest.fixture(scope="module")
def cube():
    mesh = build_mesh(2, UNIT, MappingSpec("identity-affine"))
    return build_complex(mesh, 2)


def _zero_state(cx):
    return SimulationState(
        k=0,
        t=0.0,
        u=cx.zero_field("D"),
        omega=cx.zero_field("C"),
        B=cx.zero_field("D"),
        j=cx.zero_field("C"),
        H=cx.zero_field("C0"),
    )


def test_energies_zero_state(cube):
    kinetic, magnetic, total, dual = energies(cube, _zero_state(cube), PARAMS)
    assert (kinetic, magnetic, total, dual) == (0.0, 0.0, 0.0, 0.0)


def test_kinetic_energy_of_unit_field(cube):
    # |u| = 1 on the unit cube gives kinetic energy exactly 1/2
    def unit_x(points, t):
        x = points[..., 0]
        one = np.ones_like(x)
        zero = np.zeros_like(x)
        return np.stack(np.broadcast_arrays(one, zero, zero), axis=-1)

    state = _zero_state(cube)
    state.u = interpolate(cube, "D", unit_x)
    kinetic, _, _, _ = energies(cube, state, PARAMS)
    assert abs(kinetic - 0.5) < 1e-12


def test_magnetic_energy_scales_with_lorentz_constant(cube):
    state = _zero_state(cube)
    state.B = interpolate(cube, "D", lambda p, t: np.stack(
        np.broadcast_arrays(np.ones_like(p[..., 0]),
                            np.zeros_like(p[..., 0]),
                            np.zeros_like(p[..., 0])), axis=-1))
    _, mag2, _, _ = energies(cube, state, PARAMS)
    _, mag1, _, _ = energies(
        cube, state, SchemeParams(dt=0.1, T=1.0, c_lorentz=1.0)
    )
    assert abs(mag2 - 2.0 * mag1) < 1e-14


def test_energy_law_residual_static_state(cube):
    state = _zero_state(cube)
    assert energy_law_residual(cube, state, state, PARAMS) == 0.0


def test_divergence_norms_zero_and_exact_curl(cube):
    du, dB, djH = divergence_norms(cube, _zero_state(cube))
    assert (du, dB, djH) == (0.0, 0.0, 0.0)
    # any H whatsoever has exactly divergence-free curl
    state = _zero_state(cube)
    rng = np.random.default_rng(7)
    state.H = type(state.u)("C0", rng.standard_normal(cube.dim("C0")), 0.5)
    _, _, djH = divergence_norms(cube, state)
    assert djH == 0.0


def _records():
    return [
        DiagnosticsRecord(
            k=k,
            t=0.1 * k,
            kinetic=0.3 / k,
            magnetic=0.2 / k,
            total=0.5 / k,
            dual_magnetic=0.19 / k,
            dissipation=1e-3,
            energy_residual=3.5e-15 * k,
            div_u=1e-14,
            div_B=2e-15,
            div_jH=0.0,
            residual1=1e-15,
            residual2=2e-15,
        )
        for k in (1, 2, 3)
    ]


def test_csv_writer_round_trips_and_is_deterministic(tmp_path):
    import csv

    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    recs = _records()
    write_diagnostics_csv(recs, a)
    write_diagnostics_csv(recs, b)
    assert filecmp.cmp(a, b, shallow=False)

    with open(a, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3
    assert float(rows[1]["total"]) == recs[1].total
    assert int(rows[2]["k"]) == 3
    assert float(rows[0]["div_jH"]) == 0.0
