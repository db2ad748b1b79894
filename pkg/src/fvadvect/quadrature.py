"""Tensor quadrature over mesh cells, edges and time slabs.

Convex quadrilaterals are mapped bilinearly from the unit square; any other
cell is triangulated and each triangle is treated as a collapsed quad. On
rectangles the k-point midpoint rule therefore puts k*k equally weighted
points in every cell.
"""

from __future__ import annotations

import numpy as np

from . import geometry


def rule_1d(rule: str, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    if k < 1:
        raise ValueError("quadrature density must be >= 1")
    if rule == "midpoint":
        return (np.arange(k) + 0.5) / k, np.full(k, 1.0 / k)
    if rule == "gauss":
        x, w = np.polynomial.legendre.leggauss(k)
        return 0.5 * (x + 1.0), 0.5 * w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def _pieces(mesh):
    cache = mesh.__dict__.setdefault("_quad_pieces", None)
    if cache is not None:
        return cache
    quads, owner = [], []
    for k, loop in enumerate(mesh.cells):
        p = mesh.vertices[loop]
        if len(p) == 4 and geometry.is_convex(p):
            quads.append(p)
            owner.append(k)
        else:
            for t in geometry.triangulate(p):
                quads.append(np.array([t[0], t[1], t[2], t[2]]))
                owner.append(k)
    cache = (np.array(quads), np.array(owner, dtype=np.int64))
    mesh.__dict__["_quad_pieces"] = cache
    return cache


def cell_rule(mesh, rule="midpoint", k=4, chunk=None):
    """Yield ``(points, weights, owner)`` arrays covering every cell.

    Weights of one cell sum to its area. ``chunk`` bounds the number of cell
    pieces handled per yielded block.
    """
    quads, owner = _pieces(mesh)
    s, w = rule_1d(rule, k)
    S, T = np.meshgrid(s, s, indexing="ij")
    S, T = S.ravel(), T.ravel()
    W = np.outer(w, w).ravel()
    n0 = (1 - S) * (1 - T)
    n1 = S * (1 - T)
    n2 = S * T
    n3 = (1 - S) * T
    step = len(quads) if chunk is None else max(1, int(chunk))
    for start in range(0, len(quads), step):
        q = quads[start:start + step]
        p0, p1, p2, p3 = (q[:, i, None, :] for i in range(4))
        pts = n0[None, :, None] * p0 + n1[None, :, None] * p1 + n2[None, :, None] * p2 + n3[None, :, None] * p3
        dxs = (1 - T)[None, :, None] * (p1 - p0) + T[None, :, None] * (p2 - p3)
        dxt = (1 - S)[None, :, None] * (p3 - p0) + S[None, :, None] * (p2 - p1)
        jac = dxs[..., 0] * dxt[..., 1] - dxs[..., 1] * dxt[..., 0]
        yield (pts.reshape(-1, 2), (jac * W[None, :]).ravel(),
               np.repeat(owner[start:start + step], len(W)))


def cell_integrals(mesh, func, rule="midpoint", k=4, chunk=20000) -> np.ndarray:
    """Per-cell integrals of ``func(points) -> values``."""
    out = np.zeros(mesh.n_cells)
    for pts, w, own in cell_rule(mesh, rule, k, chunk):
        out += np.bincount(own, weights=w * func(pts), minlength=mesh.n_cells)
    return out


def edge_rule(mesh, k: int):
    """Gauss points along each stored edge: ``(points (E, k, 2), weights (E, k))``.

    Weights of one edge sum to its length.
    """
    s, w = rule_1d("gauss", k)
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    pts = a[:, None, :] + (b - a)[:, None, :] * s[None, :, None]
    return pts, mesh.lengths[:, None] * w[None, :]
