"""One-dimensional spectral basis on Gauss-Lobatto-Legendre points.

Two families generate every space of the 3D complex by tensor products:
nodal Lagrange polynomials of degree N on the GLL points, and "edge"
polynomials of degree N-1 whose integral over the i-th node interval is
the Kronecker delta.  The edge family represents derivatives exactly:
if p = sum_i p_i l_i then p' = sum_i (p_i - p_{i-1}) e_i.
"""

import numpy as np
from numpy.polynomial import legendre


def lobatto_nodes(n):
    """Gauss-Lobatto-Legendre nodes of degree n on [-1, 1].

    Parameters
    ----------
    n : int
        Polynomial degree, n >= 1.  Returns n+1 nodes including both
        endpoints; the interior nodes are the roots of P_n'.
    """
    if n < 1:
        raise ValueError(f"degree must be >= 1, got {n}")
    nodes = np.empty(n + 1)
    nodes[0] = -1.0
    nodes[-1] = 1.0
    if n >= 2:
        coef = np.zeros(n + 1)
        coef[n] = 1.0
        dcoef = legendre.legder(coef)
        interior = np.sort(legendre.legroots(dcoef))
        # two Newton sweeps to polish the companion-matrix roots
        ddcoef = legendre.legder(dcoef)
        for _ in range(2):
            interior = interior - legendre.legval(interior, dcoef) / legendre.legval(
                interior, ddcoef
            )
        nodes[1:-1] = interior
    return nodes


def lagrange_eval(nodes, x):
    """Evaluate all Lagrange polynomials for `nodes` at points `x`.

    Returns an array of shape (len(nodes), len(x)); row i is l_i(x).
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    out = np.ones((n, x.size))
    for i in range(n):
        for j in range(n):
            if j != i:
                out[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
    return out


def lagrange_deriv(nodes, x):
    """Evaluate the derivatives l_i'(x); shape (len(nodes), len(x))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    out = np.zeros((n, x.size))
    for i in range(n):
        for m in range(n):
            if m == i:
                continue
            term = np.full(x.size, 1.0 / (nodes[i] - nodes[m]))
            for k in range(n):
                if k == i or k == m:
                    continue
                term *= (x - nodes[k]) / (nodes[i] - nodes[k])
            out[i] += term
    return out


def edge_eval(nodes, x):
    """Evaluate the edge polynomials for `nodes` at points `x`.

    Row s (s = 0 .. n-1) is the function associated with the interval
    [nodes[s], nodes[s+1]]; its integral over interval t is delta_st.
    """
    dl = lagrange_deriv(nodes, x)
    return -np.cumsum(dl, axis=0)[:-1]
