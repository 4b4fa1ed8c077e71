"""Grid construction and box-arithmetic index sets."""

import numpy as np
import pytest

from gmsfem.mesh import (build_coarse_mesh, build_fine_mesh, build_overlap,
                         _box_boundary_nodes)


def test_fine_mesh_counts_and_coords():
    m = build_fine_mesh(4, 3)
    assert m.n_nodes == 5 * 4
    assert m.n_cells == 12
    assert m.triangles.shape == (24, 3)
    assert np.allclose(m.node_coords[0], [0.0, 0.0])
    assert np.allclose(m.node_coords[-1], [1.0, 1.0])
    assert m.node_id(4, 3) == m.n_nodes - 1
    assert m.cell_id(3, 2) == m.n_cells - 1


def test_triangle_areas_cover_unit_square():
    m = build_fine_mesh(5, 7)
    p = m.node_coords[m.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0])
                  - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    assert np.all(area > 0)  # consistent orientation
    assert area.sum() == pytest.approx(1.0, abs=1e-14)


def test_fine_mesh_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_fine_mesh(0, 4)


def test_boundary_nodes():
    m = build_fine_mesh(3, 3)
    assert len(m.boundary_nodes) == 4 * 3  # perimeter of a 4x4 node grid
    xy = m.node_coords[m.boundary_nodes]
    on_edge = (np.isclose(xy, 0.0) | np.isclose(xy, 1.0)).any(axis=1)
    assert on_edge.all()


def test_box_index_sets():
    m = build_fine_mesh(6, 6)
    cells = m.cells_in_box(1, 4, 2, 5)
    assert len(cells) == 9
    nodes = m.nodes_in_cell_box(1, 4, 2, 5)
    assert len(nodes) == 16
    interior = m.interior_nodes_of_cell_box(1, 4, 2, 5)
    assert len(interior) == 4
    # interior nodes are never on the box edge
    ii, jj = interior % 7, interior // 7
    assert ii.min() >= 2 and ii.max() <= 3
    assert jj.min() >= 3 and jj.max() <= 4


def test_free_nodes_of_cell_box_domain_boundary_exception():
    m = build_fine_mesh(6, 6)
    # box touching the domain boundary: edge nodes there stay free
    fn = m.free_nodes_of_cell_box(0, 3, 0, 3)
    ii, jj = fn % 7, fn // 7
    assert ii.min() == 0 and jj.min() == 0
    assert ii.max() == 2 and jj.max() == 2
    # fully interior box: all edges constrain
    fn2 = m.free_nodes_of_cell_box(1, 4, 1, 4)
    assert np.array_equal(fn2, m.interior_nodes_of_cell_box(1, 4, 1, 4))


def test_coarse_mesh_structure():
    fine = build_fine_mesh(12, 12)
    cm = build_coarse_mesh(fine, 4, 4)
    assert (cm.mx, cm.my) == (3, 3)
    assert cm.N_v == 25
    assert cm.n_blocks == 16
    assert len(cm.neighborhoods) == 25
    assert len(cm.interior_coarse_nodes) == 9
    # coarse node fine ids sit on the block corners
    i = cm.coarse_node_id(2, 3)
    assert cm.coarse_node_fine_ids[i] == fine.node_id(6, 9)
    assert cm.coarse_node_ij(i) == (2, 3)


def test_coarse_mesh_divisibility():
    fine = build_fine_mesh(10, 10)
    with pytest.raises(ValueError):
        build_coarse_mesh(fine, 3, 3)


def test_neighborhood_boxes_clip_at_domain():
    fine = build_fine_mesh(12, 12)
    cm = build_coarse_mesh(fine, 4, 4)
    corner = cm.neighborhoods[cm.coarse_node_id(0, 0)]
    assert corner.cell_box == (0, 3, 0, 3)
    interior = cm.neighborhoods[cm.coarse_node_id(2, 2)]
    assert interior.cell_box == (3, 9, 3, 9)
    assert len(interior.nodes) == 49
    bnd = interior.boundary_nodes
    assert np.all(np.isin(bnd, interior.nodes))
    assert len(bnd) == 24


def test_neighborhood_padding():
    fine = build_fine_mesh(12, 12)
    cm = build_coarse_mesh(fine, 4, 4, pad=2)
    nb = cm.neighborhoods[cm.coarse_node_id(2, 2)]
    assert nb.ext_cell_box == (1, 11, 1, 11)
    nb0 = cm.neighborhoods[cm.coarse_node_id(0, 0)]
    assert nb0.ext_cell_box == (0, 5, 0, 5)


def test_box_boundary_nodes():
    fine = build_fine_mesh(8, 8)
    bnd = _box_boundary_nodes(fine, (2, 5, 2, 5))
    assert len(bnd) == 12
    ii, jj = bnd % 9, bnd // 9
    on = (ii == 2) | (ii == 5) | (jj == 2) | (jj == 5)
    assert on.all()


def test_overlap_decomposition():
    fine = build_fine_mesh(12, 12)
    cm = build_coarse_mesh(fine, 3, 3)
    ov = build_overlap(cm, delta_layers=1)
    assert ov.n_subdomains == 9
    assert ov.cell_boxes[0] == (0, 5, 0, 5)  # clipped at the domain corner
    assert ov.cell_boxes[4] == (3, 9, 3, 9)
    # subdomains cover every fine node
    cover = np.zeros(fine.n_nodes, dtype=int)
    for nodes in ov.subdomain_nodes:
        cover[nodes] += 1
    assert cover.min() >= 1
    with pytest.raises(ValueError):
        build_overlap(cm, delta_layers=0)
