"""Tests for the legacy VTK snapshot writer."""

import numpy as np
import pytest

from hallmhd.assembly import evaluate_field, interpolate
from hallmhd.derham import build_complex
from hallmhd.mesh import BoxDomain, MappingSpec, build_mesh, geometry_at_all
from hallmhd.vtk import write_vtk

UNIT = BoxDomain((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


def _linear(points, t):
    x = points[..., 0]
    y = points[..., 1]
    z = points[..., 2]
    return np.stack(np.broadcast_arrays(y, z, x), axis=-1)


@pytest.fixture(scope="module")
def cube():
    mesh = build_mesh(2, UNIT, MappingSpec("crazy", c=0.1))
    return build_complex(mesh, 2)


def _parse(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    sections = {}
    i = 0
    while i < len(lines):
        tok = lines[i].split()
        if tok and tok[0] in ("POINTS", "CELLS", "CELL_TYPES", "POINT_DATA",
                              "VECTORS", "SCALARS"):
            sections.setdefault(tok[0], []).append((i, tok))
        i += 1
    return lines, sections


def test_vtk_layout_and_values(cube, tmp_path):
    u = interpolate(cube, "D", _linear)
    P = cube.zero_field("S")
    path = tmp_path / "snap.vtk"
    write_vtk(cube, {"u": u, "P": P}, path, samples=3)
    lines, sections = _parse(path)

    assert lines[0].startswith("# vtk DataFile")
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"

    ne = cube.mesh.n_elements
    npts = 27 * ne
    ncells = 8 * ne
    i_pts, tok = sections["POINTS"][0]
    assert int(tok[1]) == npts
    i_cells, tok = sections["CELLS"][0]
    assert int(tok[1]) == ncells
    i_types, tok = sections["CELL_TYPES"][0]
    assert int(tok[1]) == ncells
    assert all(lines[i_types + 1 + c] == "12" for c in range(ncells))

    # all cell indices reference existing points
    for c in range(ncells):
        row = lines[i_cells + 1 + c].split()
        assert row[0] == "8"
        idx = list(map(int, row[1:]))
        assert len(idx) == 8
        assert min(idx) >= 0 and max(idx) < npts

    # first point is the mapped chart corner (-1,-1,-1) of element 0
    geo = geometry_at_all(cube.mesh, np.array([[-1.0, -1.0, -1.0]]))
    first = np.array(list(map(float, lines[i_pts + 1].split())))
    assert np.max(np.abs(first - geo.xyz[0, 0])) < 1e-14

    # vector samples match direct field evaluation
    i_vec, tok = sections["VECTORS"][0]
    assert tok[1] == "u"
    xi = np.array([(x, y, z)
                   for z in (-1.0, 0.0, 1.0)
                   for y in (-1.0, 0.0, 1.0)
                   for x in (-1.0, 0.0, 1.0)])
    vals = evaluate_field(cube, u, xi)
    written = np.array([
        list(map(float, lines[i_vec + 1 + r].split())) for r in range(npts)
    ])
    assert np.max(np.abs(written - vals.reshape(npts, 3))) < 1e-13

    i_sc, tok = sections["SCALARS"][0]
    assert tok[1] == "P"
    assert lines[i_sc + 1] == "LOOKUP_TABLE default"
    scal = [float(lines[i_sc + 2 + r]) for r in range(npts)]
    assert max(abs(v) for v in scal) == 0.0


def test_vtk_rejects_too_few_samples(cube, tmp_path):
    with pytest.raises(ValueError):
        write_vtk(cube, {}, tmp_path / "x.vtk", samples=1)
