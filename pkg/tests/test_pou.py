"""Partition-of-unity families: partition identity, support, and energy
ordering."""

import numpy as np
import pytest

from gmsfem.coeff import CoefficientField
from gmsfem.fem import assemble_mass, assemble_stiffness
from gmsfem.fields import channels_and_inclusions
from gmsfem.mesh import build_coarse_mesh, build_fine_mesh
from gmsfem.pou import (bilinear_pou, energy_min_pou, multiscale_pou,
                        pou_gradient_weight)


@pytest.fixture(scope="module")
def setup():
    fine = build_fine_mesh(20, 20)
    coarse = build_coarse_mesh(fine, 4, 4)
    kappa = channels_and_inclusions(fine, 1e3)
    return fine, coarse, kappa


def _all_pous(coarse, kappa):
    return {
        "bilinear": bilinear_pou(coarse),
        "multiscale": multiscale_pou(coarse, kappa),
        "energy-minimizing": energy_min_pou(coarse, kappa),
    }


def test_partition_identity(setup):
    fine, coarse, kappa = setup
    for name, pou in _all_pous(coarse, kappa).items():
        assert pou.sum_defect() <= 1e-12, name
        assert pou.kind == name


def test_support_contained_in_neighborhood(setup):
    fine, coarse, kappa = setup
    for name, pou in _all_pous(coarse, kappa).items():
        for nb in coarse.neighborhoods:
            outside = np.setdiff1d(np.arange(fine.n_nodes), nb.nodes)
            leak = np.abs(pou.chi[nb.coarse_node][outside]).max()
            assert leak == 0.0, (name, nb.coarse_node)


def test_bilinear_is_nodal(setup):
    fine, coarse, kappa = setup
    pou = bilinear_pou(coarse)
    fid = coarse.coarse_node_fine_ids
    vals = pou.chi[np.arange(coarse.N_v), fid]
    assert np.allclose(vals, 1.0, atol=1e-14)


def test_energy_ordering(setup):
    fine, coarse, kappa = setup
    pous = _all_pous(coarse, kappa)
    e = {k: p.energy(kappa) for k, p in pous.items()}
    assert e["energy-minimizing"] <= e["multiscale"] * (1 + 1e-12)
    assert e["multiscale"] <= e["bilinear"] * (1 + 1e-12)


def test_energy_min_is_constrained_minimum(setup):
    # any feasible perturbation (zero sum, supported where each chi may be
    # nonzero) must not decrease the total energy
    fine, coarse, kappa = setup
    pou = energy_min_pou(coarse, kappa)
    A = assemble_stiffness(fine, kappa)
    base = pou.energy(kappa)
    rng = np.random.default_rng(0)
    i, j = 6, 7  # adjacent interior coarse nodes
    fi = fine.free_nodes_of_cell_box(*coarse.neighborhoods[i].cell_box)
    fj = fine.free_nodes_of_cell_box(*coarse.neighborhoods[j].cell_box)
    shared = np.intersect1d(fi, fj)
    assert len(shared) > 0
    for _ in range(5):
        d = np.zeros(fine.n_nodes)
        d[shared] = rng.standard_normal(len(shared))
        chi = pou.chi.copy()
        chi[i] += 1e-3 * d
        chi[j] -= 1e-3 * d  # keeps the sum exactly one
        perturbed = float(sum(c @ (A @ c) for c in chi))
        assert perturbed >= base - 1e-9 * base


def test_gradient_weight_totals_energy(setup):
    fine, coarse, kappa = setup
    for name, pou in _all_pous(coarse, kappa).items():
        w = pou_gradient_weight(pou, kappa)
        from gmsfem.fem import _triangle_geometry
        _, _, area = _triangle_geometry(fine, np.arange(2 * fine.n_cells))
        assert float((w * area).sum()) == pytest.approx(
            pou.energy(kappa), rel=1e-10), name


def test_gradient_weight_tensor_field(setup):
    fine, coarse, _ = setup
    rng = np.random.default_rng(4)
    tens = CoefficientField(rng.uniform(1.0, 5.0, (fine.n_cells, 2)))
    pou = bilinear_pou(coarse)
    w = pou_gradient_weight(pou, tens)
    assert w.shape == (2 * fine.n_cells,)
    assert np.all(w >= 0)
