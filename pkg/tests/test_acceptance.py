"""Acceptance gate: the headline claims at their stated tolerances.

Each test prints one summary line so a verbose run reads as a checklist.
The runtime-heavy entries are the temporal and spatial order sweeps;
both stay inside their stated budgets on a laptop-class machine.
"""

import filecmp
import json
import math
import time

import numpy as np
import pytest

from hallmhd.assembly import interpolate, trilinear_matrix
from hallmhd.cli import main, structure_initial
from hallmhd.derham import DiscreteField, build_complex
from hallmhd.mesh import BoxDomain, MappingSpec, build_mesh
from hallmhd.mms import (
    build_case,
    convergence_sweep,
    l2_error,
    validate_case,
)
from hallmhd.scheme import SchemeParams, run

CRAZY = MappingSpec("crazy", 0.1)
UNIT = BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
BOX = BoxDomain((0.0, 0.0, 0.0), (2 * math.pi,) * 3)


def _report(n, message):
    print("acceptance %d: PASS - %s" % (n, message))


# ----------------------------------------------------------------------
# 1: complex exactness in integer arithmetic
# ----------------------------------------------------------------------


def test_criterion_1_complex_exactness():
    t0 = time.monotonic()
    for N in (1, 2, 3):
        for K in (1, 2, 3, 4):
            cx = build_complex(build_mesh(K, UNIT), N)
            assert (cx.D_div @ cx.C_curl).count_nonzero() == 0
            assert (cx.C_curl @ cx.E_grad).count_nonzero() == 0
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    _report(1, "D@C and C@E exactly zero for 12 (N, K) pairs in %.1f s"
            % elapsed)


# ----------------------------------------------------------------------
# 2: trilinear skew-symmetry under random frozen fields
# ----------------------------------------------------------------------


def test_criterion_2_trilinear_skew_symmetry():
    rng = np.random.default_rng(42)
    worst = 0.0
    checked = 0
    for mapping in (None, CRAZY):
        cx = build_complex(build_mesh(2, UNIT, mapping), 2)
        for kind, vec_space in (("A_omega", "D"), ("AA_H", "C")):
            for _ in range(25):
                b = DiscreteField(
                    "C", rng.standard_normal(cx.dim("C")), None
                )
                A = trilinear_matrix(cx, kind, b)
                a = rng.standard_normal(cx.dim(vec_space))
                c = rng.standard_normal(cx.dim(vec_space))
                resid = abs(a @ (A @ c) + c @ (A @ a))
                scale = max(
                    np.linalg.norm(a)
                    * np.linalg.norm(b.coefficients)
                    * np.linalg.norm(c),
                    1.0,
                )
                assert resid <= 1e-13 * scale
                worst = max(worst, resid / scale)
                checked += 1
    assert checked == 100
    _report(2, "100 random frozen fields, worst skew residual %.2e of scale"
            % worst)


# ----------------------------------------------------------------------
# 3-5, 9: the desk-scaled structure scenario
# ----------------------------------------------------------------------

STRUCTURE_PARAMS = SchemeParams(
    dt=0.05, T=0.5, R_f=100.0, R_m=100.0, c_lorentz=1.0, h_hall=1.0
)


def _structure_setup():
    mesh = build_mesh(3, UNIT, CRAZY)
    cx = build_complex(mesh, 2)
    u0 = interpolate(cx, "D", structure_initial)
    B0 = interpolate(cx, "D", structure_initial)
    H0 = interpolate(cx, "C0", structure_initial)
    return cx, u0, B0, H0


def _initial_energy(cx, u0, B0, c_lorentz):
    from hallmhd.assembly import cached_mass_matrix

    M_D = cached_mass_matrix(cx, "D")
    u = u0.coefficients
    B = B0.coefficients
    return 0.5 * (u @ (M_D @ u)) + 0.5 * c_lorentz * (B @ (M_D @ B))


@pytest.fixture(scope="module")
def structure_run():
    cx, u0, B0, H0 = _structure_setup()
    e0 = _initial_energy(cx, u0, B0, STRUCTURE_PARAMS.c_lorentz)
    sup = []

    def track(state, record):
        sup.append(
            (
                np.abs(state.u.coefficients).max(),
                np.abs(state.B.coefficients).max(),
            )
        )

    t0 = time.monotonic()
    state, records = run(
        cx, STRUCTURE_PARAMS, u0=u0, B0=B0, H0=H0, on_iteration=track
    )
    return records, sup, e0, time.monotonic() - t0


def test_criterion_3_pointwise_conservation(structure_run):
    records, sup, _, elapsed = structure_run
    assert len(records) == 10
    worst_u = worst_B = 0.0
    for record, (u_max, B_max) in zip(records, sup):
        assert record.div_u <= 1e-11 * u_max
        assert record.div_B <= 1e-11 * B_max
        assert record.div_jH == 0.0
        worst_u = max(worst_u, record.div_u / u_max)
        worst_B = max(worst_B, record.div_B / B_max)
    assert elapsed < 300.0
    _report(
        3,
        "10 iterations in %.0f s: div u <= %.1e |u|, div B <= %.1e |B|, "
        "div jH = 0" % (elapsed, worst_u, worst_B),
    )


def test_criterion_4_energy_law(structure_run):
    records, _, e0, _ = structure_run
    floor = max(e0, 1.0)
    worst = max(r.energy_residual for r in records)
    assert worst <= 1e-10 * floor
    totals = [e0] + [r.total for r in records]
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    _report(4, "energy residual <= %.2e, total nonincreasing from E0"
            % worst)


def test_criterion_5_ideal_energy_conservation():
    cx, u0, B0, H0 = _structure_setup()
    params = SchemeParams(
        dt=0.05, T=0.5, c_lorentz=1.0, h_hall=1.0, ideal_mode=True
    )
    e0 = _initial_energy(cx, u0, B0, params.c_lorentz)
    state, records = run(cx, params, u0=u0, B0=B0, H0=H0)
    assert records[0].dissipation == 0.0
    drift = max(abs(r.total - e0) for r in records)
    assert drift <= 1e-10 * e0
    _report(5, "ideal run energy drift %.2e of E0 over %d iterations"
            % (drift / e0, len(records)))


def test_criterion_9_determinism(tmp_path):
    config = tmp_path / "structure.json"
    config.write_text(json.dumps({"scenario": "structure_preservation"}))
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = main(
            [
                "run", "--config", str(config),
                "--set", "K=3",
                "--set", "params.dt=0.05",
                "--set", "params.T=0.5",
                "--set", "output_dir=%s" % out,
            ]
        )
        assert code == 0
        outs.append(out / "diagnostics.csv")
    assert filecmp.cmp(outs[0], outs[1], shallow=False)
    _report(9, "two structure runs give byte-identical diagnostics.csv")


# ----------------------------------------------------------------------
# 6: temporal order
# ----------------------------------------------------------------------


def test_criterion_6_temporal_order():
    t0 = time.monotonic()
    params = SchemeParams(dt=0.25, T=1.0)
    grid = [(2, 4, 1 / 4), (2, 4, 1 / 8), (2, 4, 1 / 16)]
    reports, orders = convergence_sweep("temporal", grid, params)
    elapsed = time.monotonic() - t0
    for var in ("u", "B", "H"):
        assert 1.75 <= orders[var] <= 2.35, (var, orders[var])
    assert elapsed < 1800.0
    _report(
        6,
        "fitted temporal orders u %.2f, B %.2f, H %.2f in %.0f s"
        % (orders["u"], orders["B"], orders["H"], elapsed),
    )


# ----------------------------------------------------------------------
# 7: spatial order against an interpolation oracle
# ----------------------------------------------------------------------


def test_criterion_7_spatial_order():
    t0 = time.monotonic()
    params = SchemeParams(dt=0.01, T=0.1)
    case = build_case(params, self_check=False)
    ks = (4, 6, 8)

    # oracle first: the best rate the spaces themselves support
    interp_errors = {"u": [], "B": []}
    for K in ks:
        cx = build_complex(build_mesh(K, BOX), 1)
        for var, exact in (("u", case.u), ("B", case.B)):
            field = interpolate(cx, "D", exact, params.T)
            interp_errors[var].append(l2_error(cx, field, exact, params.T))
    hs = np.log([2 * math.pi / K for K in ks])
    rates = {
        var: float(np.polyfit(hs, np.log(errs), 1)[0])
        for var, errs in interp_errors.items()
    }

    grid = [(1, K, 0.01) for K in ks]
    reports, orders = convergence_sweep("spatial", grid, params)
    elapsed = time.monotonic() - t0
    for var in ("u", "B"):
        assert orders[var] >= rates[var] - 0.3, (var, orders[var], rates[var])
    assert elapsed < 1800.0
    _report(
        7,
        "spatial orders u %.3f (oracle %.3f), B %.3f (oracle %.3f) in %.0f s"
        % (orders["u"], rates["u"], orders["B"], rates["B"], elapsed),
    )


# ----------------------------------------------------------------------
# 8: manufactured-solution self-consistency
# ----------------------------------------------------------------------


def test_criterion_8_mms_self_consistency():
    case = build_case(SchemeParams(dt=0.1, T=1.0), self_check=False)
    validate_case(case, n_points=20, tol=1e-6)
    _report(8, "closures satisfy the strong equations at 20 random points")
