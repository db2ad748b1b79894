"""Small exact polygon helpers used by mesh construction and projection."""

from __future__ import annotations

import numpy as np


def signed_area(poly) -> float:
    """Shoelace area; positive for counterclockwise loops."""
    p = np.asarray(poly, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def polygon_centroid(poly) -> np.ndarray:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def is_convex(poly) -> bool:
    """True for a counterclockwise loop with no reflex vertex."""
    p = np.asarray(poly, dtype=float)
    d = np.roll(p, -1, axis=0) - p
    dn = np.roll(d, -1, axis=0)
    cross = d[:, 0] * dn[:, 1] - d[:, 1] * dn[:, 0]
    return bool(np.all(cross >= 0.0))


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def is_simple(poly) -> bool:
    """Checks that no two non-adjacent edges properly intersect."""
    p = [tuple(v) for v in np.asarray(poly, dtype=float)]
    n = len(p)
    for i in range(n):
        a, b = p[i], p[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(a, b, p[j], p[(j + 1) % n]):
                return False
    return True


def triangulate(poly) -> list[np.ndarray]:
    """Ear-clipping triangulation of a simple counterclockwise polygon.

    Convex polygons are fanned from vertex 0. Returns a list of (3, 2) arrays.
    """
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n == 3:
        return [p.copy()]
    if is_convex(p):
        return [np.array([p[0], p[i], p[i + 1]]) for i in range(1, n - 1)]

    idx = list(range(n))
    tris = []
    guard = 0
    while len(idx) > 3 and guard < 10 * n * n:
        guard += 1
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = p[i0], p[i1], p[i2]
            if (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]) <= 0:
                continue
            others = [p[j] for j in idx if j not in (i0, i1, i2)]
            if others and np.any(points_in_triangle(np.array(others), a, b, c)):
                continue
            tris.append(np.array([a, b, c]))
            del idx[k]
            break
        else:
            raise ValueError("polygon could not be triangulated (not simple or not CCW)")
    tris.append(p[idx].copy())
    return tris


def points_in_triangle(pts, a, b, c) -> np.ndarray:
    pts = np.atleast_2d(pts)

    def side(p, q):
        return (q[0] - p[0]) * (pts[:, 1] - p[1]) - (q[1] - p[1]) * (pts[:, 0] - p[0])

    return (side(a, b) >= 0) & (side(b, c) >= 0) & (side(c, a) >= 0)


def clip_convex(subject, window) -> np.ndarray:
    """Sutherland-Hodgman clip of ``subject`` against a convex CCW ``window``.

    The subject may be concave; the result can then contain zero-width
    bridges, which do not change its shoelace area.
    """
    out = np.asarray(subject, dtype=float).reshape(-1, 2)
    w = np.asarray(window, dtype=float)
    for i in range(len(w)):
        if not len(out):
            break
        c1, c2 = w[i - 1], w[i]
        ex, ey = c2[0] - c1[0], c2[1] - c1[1]
        de = ex * (out[:, 1] - c1[1]) - ey * (out[:, 0] - c1[0])
        prev = np.roll(out, 1, axis=0)
        ds = np.roll(de, 1)
        keep = de >= 0
        cross = keep != (ds >= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = prev + (out - prev) * (ds / (ds - de))[:, None]
        # per subject vertex: the crossing point (if any), then the vertex (if inside)
        out = np.stack([hit, out], axis=1).reshape(-1, 2)[np.stack([cross, keep], axis=1).ravel()]
    return out


def intersection_area(cell, polygon, cell_tris=None) -> float:
    """Area of ``cell`` intersected with a simple polygon.

    The polygon is clipped against the cell when it is convex, and against
    each triangle of the cell (or of ``cell_tris``) otherwise.
    """
    if cell_tris is not None:
        tris = cell_tris
    else:
        tris = [cell] if is_convex(cell) else triangulate(cell)
    poly = np.asarray(polygon, dtype=float)
    if signed_area(poly) < 0:
        poly = poly[::-1]
    return float(sum(signed_area(clip_convex(poly, t)) for t in tris))


def points_in_polygon(pts, polygon, chunk_cells: int = 1 << 21) -> np.ndarray:
    """Even-odd ray casting, vectorised over points and polygon edges."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    a, b = np.roll(poly, 1, axis=0), poly
    keep = a[:, 1] != b[:, 1]
    a, b = a[keep], b[keep]
    slope = (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    inside = np.zeros(len(pts), dtype=bool)
    step = max(1, chunk_cells // max(1, len(a)))
    for s in range(0, len(pts), step):
        x = pts[s:s + step, 0, None]
        y = pts[s:s + step, 1, None]
        straddle = (a[:, 1] > y) != (b[:, 1] > y)
        xcross = a[:, 0] + (y - a[:, 1]) * slope
        inside[s:s + step] = np.count_nonzero(straddle & (x < xcross), axis=1) % 2 == 1
    return inside


def distance_to_boundary(pts, polygons) -> np.ndarray:
    """Euclidean distance from each point to the union of polygon edges."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    best = np.full(len(pts), np.inf)
    for poly in polygons:
        poly = np.asarray(poly, dtype=float)
        for i in range(len(poly)):
            a, b = poly[i - 1], poly[i]
            ab = b - a
            denom = float(ab @ ab)
            s = np.clip(((pts - a) @ ab) / denom, 0.0, 1.0)
            proj = a + s[:, None] * ab
            best = np.minimum(best, np.hypot(*(pts - proj).T))
    return best


def polygons_disjoint(polys) -> bool:
    """Pairwise interior disjointness, tested by exact clipped overlap area."""
    for i in range(len(polys)):
        ti = triangulate(_ccw(polys[i]))
        for j in range(i + 1, len(polys)):
            if intersection_area(None, polys[j], cell_tris=ti) > 1e-14:
                return False
    return True


def _ccw(poly):
    p = np.asarray(poly, dtype=float)
    return p if signed_area(p) > 0 else p[::-1]
