"""Polygonal meshes of an axis-aligned box.

Edges are stored once, oriented so that the normal points from ``left`` into
``right``; ``right == -1`` marks an impermeable boundary edge. On periodic
meshes the edges on the upper/right sides of the box are paired with their
images on the lower/left sides and carry a real right neighbour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry
from ._validation import (
    MeshDegenerateError,
    MeshValidationError,
    check_box,
    check_positive_int,
    check_real,
)

BOUNDARY = -1
BOUNDARY_KINDS = ("impermeable", "periodic")


class Mesh:
    """Immutable polygonal mesh.

    Parameters
    ----------
    vertices : (V, 2) array_like
    edges : (E, 2) array_like of int
        Vertex ids of each edge, listed in the counterclockwise order of the
        left cell.
    left, right : (E,) array_like of int
    cells : sequence of int sequences
        Counterclockwise vertex loops.
    boundary_kind : {"impermeable", "periodic"}
    """

    def __init__(self, vertices, edges, left, right, cells, boundary_kind="impermeable"):
        if boundary_kind not in BOUNDARY_KINDS:
            raise ValueError(f"boundary_kind must be one of {BOUNDARY_KINDS}")
        self.boundary_kind = boundary_kind
        self.vertices = _frozen(np.asarray(vertices, dtype=float).reshape(-1, 2))
        self.edges = _frozen(np.asarray(edges, dtype=np.int64).reshape(-1, 2))
        self.left = _frozen(np.asarray(left, dtype=np.int64))
        self.right = _frozen(np.asarray(right, dtype=np.int64))
        self.cells = tuple(_frozen(np.asarray(c, dtype=np.int64)) for c in cells)
        if not np.all(np.isfinite(self.vertices)):
            raise MeshValidationError("vertex positions must be finite")

        xy = self.vertices
        self.domain = (
            float(xy[:, 0].min()), float(xy[:, 0].max()),
            float(xy[:, 1].min()), float(xy[:, 1].max()),
        )

        a = xy[self.edges[:, 0]]
        b = xy[self.edges[:, 1]]
        d = b - a
        self.lengths = _frozen(np.hypot(d[:, 0], d[:, 1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            self.normals = _frozen(np.stack([d[:, 1], -d[:, 0]], axis=1) / self.lengths[:, None])

        areas, perims, cents, diams = [], [], [], []
        for loop in self.cells:
            p = xy[loop]
            areas.append(geometry.signed_area(p))
            perims.append(float(np.sum(np.hypot(*(np.roll(p, -1, axis=0) - p).T))))
            cents.append(geometry.polygon_centroid(p) if areas[-1] != 0 else p.mean(axis=0))
            diff = p[:, None, :] - p[None, :, :]
            diams.append(float(np.sqrt((diff ** 2).sum(-1)).max()))
        self.areas = _frozen(np.array(areas))
        self.perimeters = _frozen(np.array(perims))
        self.centroids = _frozen(np.array(cents).reshape(-1, 2))
        self.diameters = _frozen(np.array(diams))

        per_cell: list[list[tuple[int, int]]] = [[] for _ in self.cells]
        for e, (lc, rc) in enumerate(zip(self.left, self.right)):
            per_cell[lc].append((e, 1))
            if rc != BOUNDARY:
                per_cell[rc].append((e, -1))
        self.cell_edges = tuple(_frozen(np.array(ce, dtype=np.int64).reshape(-1, 2)) for ce in per_cell)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @property
    def interior(self) -> np.ndarray:
        return self.right != BOUNDARY

    def cell_polygon(self, k: int) -> np.ndarray:
        return self.vertices[self.cells[k]]

    def domain_area(self) -> float:
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) * (y1 - y0)

    def to_text(self) -> str:
        lines = [f"mesh2d v1 {self.n_vertices} {self.n_edges} {self.n_cells} {self.boundary_kind}"]
        lines += [f"v {x:.17g} {y:.17g}" for x, y in self.vertices]
        lines += [f"e {a} {b} {l} {r}" for (a, b), l, r in zip(self.edges, self.left, self.right)]
        lines += ["c " + " ".join(str(i) for i in [len(c), *c]) for c in self.cells]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def from_text(cls, text: str) -> "Mesh":
        rows = [ln.split() for ln in text.splitlines() if ln.strip()]
        if not rows or rows[0][:2] != ["mesh2d", "v1"] or len(rows[0]) != 6:
            raise MeshValidationError("missing 'mesh2d v1' header")
        nv, ne, nc = (int(v) for v in rows[0][2:5])
        kind = rows[0][5]
        verts, edges, left, right, cells = [], [], [], [], []
        for r in rows[1:]:
            tag = r[0]
            if tag == "v":
                verts.append((float(r[1]), float(r[2])))
            elif tag == "e":
                edges.append((int(r[1]), int(r[2])))
                left.append(int(r[3]))
                right.append(int(r[4]))
            elif tag == "c":
                k = int(r[1])
                if len(r) != k + 2:
                    raise MeshValidationError(f"cell line declares {k} vertices, has {len(r) - 2}")
                cells.append([int(v) for v in r[2:]])
            else:
                raise MeshValidationError(f"unknown record tag {tag!r}")
        if (len(verts), len(edges), len(cells)) != (nv, ne, nc):
            raise MeshValidationError("record counts do not match header")
        return cls(verts, edges, left, right, cells, kind)

    @classmethod
    def load(cls, path) -> "Mesh":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class RegularityReport:
    h: float
    alpha: float
    min_area: float
    max_perimeter: float


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def assemble(vertices, loops, boundary_kind="impermeable") -> Mesh:
    """Derive the edge table from cell loops by pairing opposite half-edges."""
    vertices = np.asarray(vertices, dtype=float)
    seen: dict[tuple[int, int], int] = {}
    edges, left, right = [], [], []
    for c, loop in enumerate(loops):
        for i in range(len(loop)):
            a, b = int(loop[i]), int(loop[(i + 1) % len(loop)])
            if (b, a) in seen:
                e = seen.pop((b, a))
                if right[e] != BOUNDARY:
                    raise MeshValidationError("edge shared by more than two cells", f"edge {e}")
                right[e] = c
            else:
                if (a, b) in seen:
                    raise MeshValidationError("duplicate oriented edge", f"cell {c}")
                seen[(a, b)] = len(edges)
                edges.append((a, b))
                left.append(c)
                right.append(BOUNDARY)

    if boundary_kind == "periodic":
        edges, left, right = _pair_periodic(vertices, edges, left, right)
    return Mesh(vertices, edges, left, right, loops, boundary_kind)


def _pair_periodic(vertices, edges, left, right):
    x0, x1 = vertices[:, 0].min(), vertices[:, 0].max()
    y0, y1 = vertices[:, 1].min(), vertices[:, 1].max()
    shift = np.array([x1 - x0, y1 - y0])

    def key(e, axis):
        a, b = vertices[edges[e][0]], vertices[edges[e][1]]
        return (round(float(min(a[axis], b[axis])), 12), round(float(max(a[axis], b[axis])), 12))

    low = {0: {}, 1: {}}
    high = {0: [], 1: []}
    for e in range(len(edges)):
        if right[e] != BOUNDARY:
            continue
        a, b = vertices[edges[e][0]], vertices[edges[e][1]]
        if a[0] == b[0] == x0:
            low[0][key(e, 1)] = e
        elif a[0] == b[0] == x1:
            high[0].append(e)
        elif a[1] == b[1] == y0:
            low[1][key(e, 0)] = e
        elif a[1] == b[1] == y1:
            high[1].append(e)
        else:
            raise MeshValidationError("boundary edge not on the box", f"edge {e}")

    drop = set()
    for axis, along in ((0, 1), (1, 0)):
        for e in high[axis]:
            k = key(e, along)
            if k not in low[axis]:
                raise MeshValidationError("no periodic partner", f"edge {e}")
            partner = low[axis].pop(k)
            pa = vertices[edges[partner][0]] + shift * (axis == 0, axis == 1)
            if not np.allclose(pa, vertices[edges[e][1]], atol=1e-12 * shift.max()):
                raise MeshValidationError("periodic partner misaligned", f"edge {e}")
            right[e] = left[partner]
            drop.add(partner)
        if low[axis]:
            raise MeshValidationError("unpaired periodic edge", f"edge {next(iter(low[axis].values()))}")

    keep = [e for e in range(len(edges)) if e not in drop]
    return [edges[e] for e in keep], [left[e] for e in keep], [right[e] for e in keep]


def _grid_vertices(nx, ny, domain):
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def _grid_loops(nx, ny):
    loops = []
    for j in range(ny):
        for i in range(nx):
            v = j * (nx + 1) + i
            loops.append([v, v + 1, v + nx + 2, v + nx + 1])
    return loops


def build_cartesian(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), boundary_kind="impermeable") -> Mesh:
    """Row-major ``nx`` by ``ny`` grid of rectangles tiling ``domain``."""
    nx = check_positive_int(nx, "nx")
    ny = check_positive_int(ny, "ny")
    domain = check_box(domain)
    return assemble(_grid_vertices(nx, ny, domain), _grid_loops(nx, ny), boundary_kind)


def build_perturbed_cartesian(nx, ny, domain=(0.0, 1.0, 0.0, 1.0), magnitude=0.3, seed=0,
                              boundary_kind="impermeable") -> Mesh:
    """Cartesian grid with interior vertices displaced at random.

    Each interior vertex moves by a uniformly oriented vector of length at most
    ``magnitude * min(cell width, cell height)``; boundary vertices stay put.
    """
    nx = check_positive_int(nx, "nx")
    ny = check_positive_int(ny, "ny")
    domain = check_box(domain)
    magnitude = check_real(magnitude, "magnitude", lo=0.0, hi=0.5, hi_open=True)
    verts = _grid_vertices(nx, ny, domain)
    if magnitude > 0.0 and nx > 1 and ny > 1:
        x0, x1, y0, y1 = domain
        s = min((x1 - x0) / nx, (y1 - y0) / ny)
        rng = np.random.default_rng(seed)
        ii, jj = np.meshgrid(np.arange(1, nx), np.arange(1, ny))
        ids = (jj * (nx + 1) + ii).ravel()
        r = magnitude * s * rng.random(len(ids))
        theta = 2.0 * np.pi * rng.random(len(ids))
        verts[ids, 0] += r * np.cos(theta)
        verts[ids, 1] += r * np.sin(theta)
    mesh = assemble(verts, _grid_loops(nx, ny), boundary_kind)
    bad = np.flatnonzero(mesh.areas <= 0.0)
    if bad.size:
        raise MeshDegenerateError("non-positive area after perturbation", f"cell {bad[0]}")
    return mesh


def validate_mesh(mesh: Mesh) -> RegularityReport:
    """Check structural invariants and return the mesh-size/regularity report.

    ``alpha`` is the largest value with ``alpha h^2 <= |K|`` and
    ``|dK| <= h / alpha`` for every cell.
    """
    xy = mesh.vertices
    for k, loop in enumerate(mesh.cells):
        if len(loop) < 3 or mesh.areas[k] <= 0.0:
            raise MeshValidationError("inverted or zero-area cell", f"cell {k}")
        if not geometry.is_simple(xy[loop]):
            raise MeshValidationError("self-intersecting cell", f"cell {k}")

    if np.any(mesh.lengths <= 0.0):
        e = int(np.flatnonzero(mesh.lengths <= 0.0)[0])
        raise MeshValidationError("zero-length edge", f"edge {e}")

    # every cell side must be covered by exactly one stored edge reference
    half = {}
    for k, loop in enumerate(mesh.cells):
        for i in range(len(loop)):
            half[(int(loop[i]), int(loop[(i + 1) % len(loop)]))] = k
    periodic = mesh.boundary_kind == "periodic"
    counts = np.zeros(mesh.n_cells, dtype=np.int64)
    for e, ((a, b), lc, rc) in enumerate(zip(mesh.edges, mesh.left, mesh.right)):
        if half.get((int(a), int(b))) != lc:
            raise MeshValidationError("edge is not a side of its left cell", f"edge {e}")
        counts[lc] += 1
        if rc == BOUNDARY:
            if periodic:
                raise MeshValidationError("unpaired edge on a periodic mesh", f"edge {e}")
            continue
        if not 0 <= rc < mesh.n_cells:
            raise MeshValidationError("right cell out of range", f"edge {e}")
        if half.get((int(b), int(a))) != rc and not (periodic and _on_box(mesh, a, b)):
            raise MeshValidationError("unpaired interior edge", f"edge {e}")
        counts[rc] += 1
    sides = np.array([len(c) for c in mesh.cells])
    bad = np.flatnonzero(counts != sides)
    if bad.size:
        raise MeshValidationError("cell sides and edge references disagree", f"cell {bad[0]}")

    total = float(math.fsum(mesh.areas))
    dom = mesh.domain_area()
    if abs(total - dom) > 1e-12 * dom:
        raise MeshValidationError(f"cell areas sum to {total!r}, domain area is {dom!r}")

    h = mesh.h
    alpha = float(min(np.min(mesh.areas / h ** 2), np.min(h / mesh.perimeters)))
    if not alpha > 0.0:
        raise MeshValidationError("regularity constant alpha is not positive")
    return RegularityReport(h=h, alpha=alpha, min_area=float(mesh.areas.min()),
                            max_perimeter=float(mesh.perimeters.max()))


def _on_box(mesh, a, b) -> bool:
    x0, x1, y0, y1 = mesh.domain
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    return bool((pa[0] == pb[0] and pa[0] in (x0, x1)) or (pa[1] == pb[1] and pa[1] in (y0, y1)))


def closure_defect(mesh: Mesh) -> np.ndarray:
    """Per-cell norm of sum(length * outward normal); zero for closed polygons."""
    out = np.zeros((mesh.n_cells, 2))
    w = mesh.lengths[:, None] * mesh.normals
    np.add.at(out, mesh.left, w)
    inner = mesh.interior
    np.add.at(out, mesh.right[inner], -w[inner])
    return np.hypot(out[:, 0], out[:, 1])
