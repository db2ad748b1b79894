import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvadvect._validation import MeshDegenerateError, MeshValidationError
from fvadvect.mesh import (
    BOUNDARY, Mesh, assemble, build_cartesian, build_perturbed_cartesian, closure_defect, validate_mesh,
)


def test_two_by_two_cartesian():
    m = build_cartesian(2, 2)
    assert m.n_cells == 4
    np.testing.assert_array_equal(m.areas, 0.25)
    assert int(m.interior.sum()) == 4
    assert int((~m.interior).sum()) == 8


def test_single_cell():
    m = build_cartesian(1, 1)
    assert m.n_cells == 1 and m.areas[0] == 1.0
    assert not m.interior.any()
    rep = validate_mesh(m)
    assert rep.h == pytest.approx(math.sqrt(2))
    assert rep.alpha == pytest.approx(min(0.5, math.sqrt(2) / 4))


def test_four_by_four_regularity():
    rep = validate_mesh(build_cartesian(4, 4))
    assert rep.h == pytest.approx(math.sqrt(2) / 4, rel=1e-15)
    # |K| / h^2 = 1/2 and h / |dK| = 1 / (2 sqrt 2)
    assert rep.alpha == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-15)


@pytest.mark.parametrize("nx,ny", [(0, 3), (3, -1), (2.5, 2)])
def test_bad_counts(nx, ny):
    with pytest.raises(ValueError):
        build_cartesian(nx, ny)


def test_row_major_cells_and_orientation():
    m = build_cartesian(3, 2, domain=(0, 3, 0, 2))
    np.testing.assert_allclose(m.centroids[:4], [[0.5, 0.5], [1.5, 0.5], [2.5, 0.5], [0.5, 1.5]])
    # normals point from left cell to right cell
    for e in np.flatnonzero(m.interior):
        step = m.centroids[m.right[e]] - m.centroids[m.left[e]]
        assert step @ m.normals[e] > 0


def test_periodic_pairing():
    m = build_cartesian(4, 4, boundary_kind="periodic")
    assert m.n_edges == 32
    assert np.all(m.right != BOUNDARY)
    validate_mesh(m)
    # every cell has exactly four neighbours through stored edges
    assert all(len(ce) == 4 for ce in m.cell_edges)
    np.testing.assert_allclose(closure_defect(m), 0.0, atol=1e-15)


def test_zero_perturbation_is_cartesian():
    a = build_perturbed_cartesian(4, 4, magnitude=0.0, seed=123)
    b = build_cartesian(4, 4)
    assert a.to_text() == b.to_text()


def test_perturbed_determinism():
    a = build_perturbed_cartesian(4, 4, magnitude=0.3, seed=42)
    b = build_perturbed_cartesian(4, 4, magnitude=0.3, seed=42)
    assert a.to_text().encode() == b.to_text().encode()
    c = build_perturbed_cartesian(4, 4, magnitude=0.3, seed=43)
    assert a.to_text() != c.to_text()


def test_perturbed_area_sum():
    m = build_perturbed_cartesian(8, 8, magnitude=0.3, seed=7)
    assert abs(math.fsum(m.areas) - 1.0) <= 1e-12
    validate_mesh(m)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(0.0, 0.45), st.integers(0, 2**31),
       st.sampled_from(["impermeable", "periodic"]))
def test_perturbed_meshes_are_valid(nx, ny, mag, seed, kind):
    m = build_perturbed_cartesian(nx, ny, (0.0, 2.0, -1.0, 1.0), mag, seed, kind)
    rep = validate_mesh(m)
    assert rep.alpha > 0
    np.testing.assert_allclose(closure_defect(m), 0.0, atol=1e-14)


def test_magnitude_bounds():
    with pytest.raises(ValueError):
        build_perturbed_cartesian(4, 4, magnitude=0.5)


def test_text_round_trip(tmp_path):
    m = build_perturbed_cartesian(5, 3, magnitude=0.25, seed=3, boundary_kind="periodic")
    path = tmp_path / "m.txt"
    m.save(path)
    back = Mesh.load(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.edges, m.edges)
    np.testing.assert_array_equal(back.right, m.right)
    assert back.boundary_kind == "periodic"
    assert back.to_text() == m.to_text()


def test_arrays_are_read_only():
    m = build_cartesian(2, 2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 1.0


def test_zero_area_cell_rejected():
    verts = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]
    loops = [[0, 1, 4, 3], [1, 2, 5, 4], [1, 2, 2]]
    m = Mesh(verts, [(0, 1)], [0], [BOUNDARY], loops)
    with pytest.raises(MeshValidationError, match="cell 2"):
        validate_mesh(m)


def test_inverted_cell_rejected():
    verts = [(0, 0), (1, 0), (1, 1), (0, 1)]
    m = assemble(verts, [[0, 3, 2, 1]])
    with pytest.raises(MeshValidationError, match="cell 0"):
        validate_mesh(m)


def test_unpaired_interior_edge_rejected():
    m = build_cartesian(2, 1)
    right = np.array(m.right)
    e = int(np.flatnonzero(~m.interior)[0])
    right[e] = 1 - m.left[e]
    bad = Mesh(m.vertices, m.edges, m.left, right, m.cells)
    with pytest.raises(MeshValidationError, match=f"edge {e}"):
        validate_mesh(bad)


def test_area_sum_mismatch_rejected():
    # two unit squares with a gap between them still report their bounding box
    verts = [(0, 0), (1, 0), (1, 1), (0, 1), (2, 0), (3, 0), (3, 1), (2, 1)]
    m = assemble(verts, [[0, 1, 2, 3], [4, 5, 6, 7]])
    with pytest.raises(MeshValidationError, match="areas sum"):
        validate_mesh(m)


def test_degenerate_perturbation_raises(monkeypatch):
    import fvadvect.mesh as mesh_mod

    # a clockwise loop stands in for a cell folded by the perturbation
    monkeypatch.setattr(mesh_mod, "_grid_loops", lambda nx, ny: [[0, nx + 1, nx + 2, 1]])
    with pytest.raises(MeshDegenerateError, match="cell 0"):
        build_perturbed_cartesian(1, 1, magnitude=0.0)
