"""Legacy ASCII VTK output.

Fields are sampled on a uniform chart-point lattice inside every
element and written as an unstructured grid of hexahedral cells.  Points
are duplicated across element boundaries, which the legacy format is
happy with and which keeps the sampling purely element-local.
"""

import numpy as np

from .assembly import evaluate_field
from .mesh import geometry_at_all

_SCALAR_SPACES = ("G", "S")
_VECTOR_SPACES = ("C", "C0", "D")


def _lattice(samples):
    line = np.linspace(-1.0, 1.0, samples)
    pts = np.array([(x, y, z) for z in line for y in line for x in line])
    return pts


def _cell_template(samples):
    # corner offsets of every sub-hexahedron, VTK_HEXAHEDRON ordering
    s = samples
    cells = []
    for k in range(s - 1):
        for j in range(s - 1):
            for i in range(s - 1):
                base = i + s * j + s * s * k
                bottom = [base, base + 1, base + 1 + s, base + s]
                cells.append(bottom + [c + s * s for c in bottom])
    return np.array(cells, dtype=np.int64)


def write_vtk(complex_, fields, path, samples=None, title="hallmhd snapshot"):
    """Write discrete fields to one legacy ASCII VTK file.

    Parameters
    ----------
    complex_ : DeRhamComplex
    fields : dict
        Maps data names to DiscreteFields; scalar spaces become SCALARS
        entries, vector spaces VECTORS entries.
    path : str or Path
    samples : int or None
        Lattice points per direction and element, at least 2; defaults
        to N + 1 so each cell of the lattice spans about one degree of
        freedom.
    title : str
    """
    s = samples if samples is not None else complex_.N + 1
    if s < 2:
        raise ValueError("need at least 2 sample points per direction")
    for name, field in fields.items():
        if field.space not in _SCALAR_SPACES + _VECTOR_SPACES:
            raise ValueError(f"field {name!r} has unknown space {field.space!r}")

    xi = _lattice(s)
    npts = xi.shape[0]
    geo = geometry_at_all(complex_.mesh, xi)
    ne = complex_.mesh.n_elements
    points = geo.xyz.reshape(ne * npts, 3)

    template = _cell_template(s)
    cells = (
        template[None, :, :] + (np.arange(ne) * npts)[:, None, None]
    ).reshape(-1, 8)

    def fmt(values):
        return " ".join("%.16g" % v for v in values)

    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title + "\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write("POINTS %d double\n" % points.shape[0])
        for p in points:
            fh.write(fmt(p) + "\n")
        fh.write("CELLS %d %d\n" % (cells.shape[0], 9 * cells.shape[0]))
        for c in cells:
            fh.write("8 " + " ".join(str(i) for i in c) + "\n")
        fh.write("CELL_TYPES %d\n" % cells.shape[0])
        for _ in range(cells.shape[0]):
            fh.write("12\n")
        fh.write("POINT_DATA %d\n" % points.shape[0])
        for name, field in fields.items():
            vals = evaluate_field(complex_, field, xi)
            if field.space in _SCALAR_SPACES:
                flat = np.asarray(vals).reshape(ne * npts)
                fh.write("SCALARS %s double 1\n" % name)
                fh.write("LOOKUP_TABLE default\n")
                for v in flat:
                    fh.write("%.16g\n" % v)
            else:
                flat = np.asarray(vals).reshape(ne * npts, 3)
                fh.write("VECTORS %s double\n" % name)
                for v in flat:
                    fh.write(fmt(v) + "\n")
