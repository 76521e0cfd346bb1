"""Log-log convergence figures and conservation time series from solver CSVs.

This package consumes the delimited files the solver writes: errors.csv
rows (N, K, dt, variable, error) and diagnostics.csv rows (one per
iteration).  Nothing here recomputes physics, so a figure cannot drift
from the numbers the solver actually produced.

Fitted orders are least-squares slopes in log-log coordinates over all
points of a curve; no point is ever dropped by the fit.  Excluding an
outlier means editing the plot spec, not the fit.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

KINDS = ("temporal_rates", "spatial_rates", "conservation")

ERROR_COLUMNS = ("N", "K", "dt", "variable", "error")

# log-scale columns of the conservation figure, in plot order
CONSERVATION_COLUMNS = ("energy_residual", "div_u", "div_B", "div_jH")

REFERENCE_LEVEL = 1e-10


# ----------------------------------------------------------------------
# errors
# ----------------------------------------------------------------------


class PlotError(Exception):
    """Base class for all errors raised by this package."""


class SpecError(PlotError):
    """A plot spec is invalid; the message names the offending field."""


class EmptyDataError(PlotError):
    """An input CSV has a header but no data rows, or no header at all."""


class MissingColumnError(PlotError):
    """An input CSV lacks a column the plot needs."""


# ----------------------------------------------------------------------
# plot specs
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: where the data is and what to draw from it.

    variables is None for "everything present in the file"; for rate
    kinds it selects rows by their variable column, for the conservation
    kind it selects which log-scale diagnostic columns to draw.
    """

    kind: str
    inputs: tuple
    output: str
    variables: tuple | None = None


_SPEC_KEYS = {"kind", "input", "output", "variables"}


def spec_from_doc(doc):
    """Build a PlotSpec from one parsed JSON object, validating fields."""
    if not isinstance(doc, dict):
        raise SpecError("plot spec must be a JSON object")
    for key in doc:
        if key not in _SPEC_KEYS:
            raise SpecError(f"unknown plot spec key {key!r}")
    for key in ("kind", "input", "output"):
        if key not in doc:
            raise SpecError(f"plot spec key {key!r} is required")
    kind = doc["kind"]
    if kind not in KINDS:
        raise SpecError(
            f"unknown plot kind {kind!r}; expected one of {', '.join(KINDS)}"
        )
    raw = doc["input"]
    inputs = [raw] if isinstance(raw, str) else raw
    if not isinstance(inputs, list) or not inputs or not all(
        isinstance(p, str) for p in inputs
    ):
        raise SpecError("'input' must be a CSV path or a list of CSV paths")
    output = doc["output"]
    if not isinstance(output, str) or not output.lower().endswith(
        (".png", ".svg")
    ):
        raise SpecError("'output' must be an image path ending in .png or .svg")
    variables = doc.get("variables")
    if variables is not None:
        if not isinstance(variables, list) or not all(
            isinstance(v, str) for v in variables
        ):
            raise SpecError("'variables' must be a list of names")
        variables = tuple(variables)
    return PlotSpec(kind=kind, inputs=tuple(inputs), output=output,
                    variables=variables)


def load_specs(path):
    """Parse a spec file holding one JSON object or a list of them."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise SpecError(f"cannot read spec file: {exc}") from exc
    if not text.strip():
        raise SpecError(f"{path}: empty spec file")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: not valid JSON: {exc}") from exc
    docs = doc if isinstance(doc, list) else [doc]
    return [spec_from_doc(d) for d in docs]


# ----------------------------------------------------------------------
# CSV input
# ----------------------------------------------------------------------


def _read_rows(path, required):
    """All rows of one CSV as string dicts; the header must cover required."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames
        if names is None:
            raise EmptyDataError(f"{path}: empty file")
        for column in required:
            if column not in names:
                raise MissingColumnError(f"{path}: missing column {column!r}")
        rows = list(reader)
    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    return rows


def _error_rows(spec):
    """Typed rows of every input errors.csv, concatenated."""
    rows = []
    for path in spec.inputs:
        for row in _read_rows(path, ERROR_COLUMNS):
            rows.append(
                (int(row["N"]), int(row["K"]), float(row["dt"]),
                 row["variable"], float(row["error"]))
            )
    return rows


# ----------------------------------------------------------------------
# rate figures
# ----------------------------------------------------------------------


def _fit_order(x, y):
    """Least-squares slope of log y against log x over every point."""
    if len(x) < 2:
        return float("nan")
    with np.errstate(divide="ignore"):
        lx = np.log(np.asarray(x, dtype=float))
        ly = np.log(np.asarray(y, dtype=float))
    if not (np.all(np.isfinite(lx)) and np.all(np.isfinite(ly))):
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])


def _rate_curves(spec):
    """Group error rows into (label, x, y, order) curves.

    temporal_rates draws error against dt with one curve per
    (variable, N, K) family; spatial_rates draws error against 1/K with
    one curve per (variable, N) family, matching how the solver fits
    each polynomial-degree family separately.  Family details enter the
    label only when a variable spans more than one family.
    """
    rows = _error_rows(spec)
    temporal = spec.kind == "temporal_rates"
    variables = []
    for _, _, _, var, _ in rows:
        if var not in variables:
            variables.append(var)
    wanted = variables if spec.variables is None else list(spec.variables)
    for var in wanted:
        if var not in variables:
            raise SpecError(
                f"variable {var!r} has no rows in {', '.join(spec.inputs)}"
            )
    curves = []
    for var in wanted:
        families = []
        for N, K, dt, v, _ in rows:
            key = (N, K) if temporal else (N,)
            if v == var and key not in families:
                families.append(key)
        for key in families:
            xs, ys = [], []
            for N, K, dt, v, err in rows:
                if v != var or ((N, K) if temporal else (N,)) != key:
                    continue
                xs.append(dt if temporal else 1.0 / K)
                ys.append(err)
            order = np.argsort(xs)
            xs = [xs[i] for i in order]
            ys = [ys[i] for i in order]
            label = var
            if len(families) > 1:
                label = f"{var}, " + (
                    f"N={key[0]}, K={key[1]}" if temporal else f"N={key[0]}"
                )
            curves.append((label, xs, ys, _fit_order(xs, ys)))
    return curves


def _slope_triangle(ax, curves):
    """Classic reference triangle under the data, nearest-integer slope."""
    orders = [c[3] for c in curves if np.isfinite(c[3])]
    if not orders:
        return
    p = max(1, round(float(np.median(orders))))
    x0 = min(min(c[1]) for c in curves)
    x1 = max(max(c[1]) for c in curves)
    y0 = min(min(c[2]) for c in curves)
    xa, xb = x0, x0 * (x1 / x0) ** 0.35
    ya = y0 / 4.0
    yb = ya * (xb / xa) ** p
    ax.plot([xa, xb, xb, xa], [ya, ya, yb, ya], color="0.4", lw=1.0)
    ax.text((xa * xb) ** 0.5, ya * 0.82, "1", ha="center", va="top",
            fontsize=9, color="0.3")
    ax.text(xb * 1.06, (ya * yb) ** 0.5, str(p), ha="left", va="center",
            fontsize=9, color="0.3")


def _rates_figure(spec):
    curves = _rate_curves(spec)
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    markers = "osd^v<>P*"
    orders = {}
    annotations = {}
    for i, (label, xs, ys, order) in enumerate(curves):
        orders[label] = order
        text = label
        if np.isfinite(order):
            annotations[label] = f"{order:.2f}"
            text = f"{label}: slope {order:.2f}"
        ax.loglog(xs, ys, marker=markers[i % len(markers)], ms=5, label=text)
    _slope_triangle(ax, curves)
    ax.set_xlabel(r"$\Delta t$" if spec.kind == "temporal_rates" else "$1/K$")
    ax.set_ylabel("error")
    ax.grid(True, which="both", ls=":", lw=0.5, alpha=0.6)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)
    for label in orders:
        print(f"{label}: slope {orders[label]:.2f}")
    return {
        "kind": spec.kind,
        "output": spec.output,
        "orders": orders,
        "annotations": annotations,
    }


# ----------------------------------------------------------------------
# conservation figure
# ----------------------------------------------------------------------


def _conservation_figure(spec):
    selected = (
        CONSERVATION_COLUMNS if spec.variables is None else spec.variables
    )
    required = ("t", "kinetic", "magnetic", "total") + tuple(selected)
    rows = []
    for path in spec.inputs:
        rows.extend(_read_rows(path, required))
    t = np.array([float(r["t"]) for r in rows])
    series = {
        name: np.array([float(r[name]) for r in rows]) for name in required[1:]
    }
    drift = float(np.max(np.abs(series["total"] - series["total"][0])))
    column_max = {name: float(np.max(series[name])) for name in selected}

    import matplotlib.pyplot as plt

    fig, (ax0, ax1) = plt.subplots(
        2, 1, figsize=(5.6, 5.6), sharex=True,
        gridspec_kw={"height_ratios": [1.0, 1.4]},
    )
    for name in ("kinetic", "magnetic", "total"):
        ax0.plot(t, series[name], label=name)
    ax0.set_ylabel("energy")
    ax0.legend(loc="best", fontsize=9)
    ax0.text(0.02, 0.06, f"max drift of total: {drift:.2e}",
             transform=ax0.transAxes, fontsize=9)

    for name in selected:
        values = series[name]
        label = name
        if np.all(values == 0.0):
            label = f"{name} (exactly 0)"
        ax1.semilogy(t, np.ma.masked_less_equal(values, 0.0), label=label)
    ax1.axhline(REFERENCE_LEVEL, color="k", ls="--", lw=1.0,
                label=f"{REFERENCE_LEVEL:.0e}")
    positive = [series[n][series[n] > 0.0] for n in selected]
    positive = [v for v in positive if v.size]
    if positive:
        low = min(v.min() for v in positive)
        ax1.set_ylim(low / 10.0, REFERENCE_LEVEL * 100.0)
    else:
        ax1.set_ylim(REFERENCE_LEVEL * 1e-8, REFERENCE_LEVEL * 100.0)
    ax1.set_xlabel("t")
    ax1.set_ylabel("residual")
    ax1.grid(True, which="both", ls=":", lw=0.5, alpha=0.6)
    ax1.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.output)
    plt.close(fig)

    print(f"max drift of total energy: {drift:.2e}")
    for name in selected:
        print(f"max {name}: {column_max[name]:.2e}")
    return {
        "kind": spec.kind,
        "output": spec.output,
        "max_drift": drift,
        "columns": column_max,
        "reference": REFERENCE_LEVEL,
    }


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------


def plot(spec):
    """Render one figure from a PlotSpec; returns what was drawn.

    Rate kinds return the fitted orders and their two-decimal slope
    annotations keyed by curve label; the conservation kind returns the
    maximum energy drift and the per-column maxima against the reference
    level.  All input validation happens before any figure is created,
    so a bad CSV never leaves an empty image behind.
    """
    if spec.kind in ("temporal_rates", "spatial_rates"):
        return _rates_figure(spec)
    if spec.kind == "conservation":
        return _conservation_figure(spec)
    raise SpecError(f"unknown plot kind {spec.kind!r}")
