import numpy as np
import pytest

from gaugesmooth import (
    Cochain,
    LieAlgebra,
    build_grid,
    codifferential,
    constant_form,
    curvature,
    exterior_d,
    inner,
    norm,
)
from gaugesmooth.hodge import (
    GaugeHypothesisError,
    NotClosedError,
    decompose,
    harmonic_part,
    reconstruct_potential,
)


def rough_connection(grid, rng, algebra=None, scale=0.05):
    shape = (algebra.m, algebra.m) if algebra else (1, 1)
    if algebra:
        phi = algebra.random(rng, grid.num_cells(0))
        psi = algebra.random(rng, grid.num_cells(2))
    else:
        phi = rng.standard_normal((grid.num_cells(0),) + shape)
        psi = rng.standard_normal((grid.num_cells(2),) + shape)
    om = exterior_d(Cochain(grid, 0, phi, algebra)) + codifferential(Cochain(grid, 2, psi, algebra))
    return om * (scale / norm(om, 2).value)


@pytest.mark.parametrize(
    "grid",
    [build_grid(2, 8, 1 / 8), build_grid(2, 8, 1 / 8, "torus"), build_grid(3, 4, 0.25)],
    ids=["box2", "torus2", "box3"],
)
def test_decompose_reconstructs(grid, rng):
    alg = LieAlgebra("su2", 4)
    om = rough_connection(grid, rng, alg)
    split = decompose(om, curvature(om))
    assert split.residual < 1e-10
    rebuilt = exterior_d(split.phi) + codifferential(split.psi) + split.eta
    assert np.allclose(rebuilt.values, om.values, atol=1e-12)


def test_parts_are_orthogonal(rng):
    g = build_grid(2, 8, 1 / 8, "torus")
    om = rough_connection(g, rng) + constant_form(g, 1, {(0,): 0.3, (1,): -0.1})
    split = decompose(om, curvature(om))
    exact, coexact = exterior_d(split.phi), codifferential(split.psi)
    assert abs(inner(exact, coexact)) < 1e-12
    assert abs(inner(exact, split.eta)) < 1e-12
    assert abs(inner(coexact, split.eta)) < 1e-12
    assert norm(split.eta, 2).value > 0.1


def test_harmonic_part_vanishes_on_box(rng):
    g = build_grid(2, 6, 1 / 6)
    om = rough_connection(g, rng)
    assert np.all(harmonic_part(om).values == 0)


def test_harmonic_part_of_constant_on_torus_is_itself():
    g = build_grid(2, 6, 1 / 6, "torus")
    c = constant_form(g, 1, {(0,): 1.0, (1,): 2.0})
    assert np.allclose(harmonic_part(c).values, c.values)


def test_gauge_hypothesis_violation(rng):
    g = build_grid(2, 6, 1 / 6)
    om = rough_connection(g, rng)
    F = curvature(om) + Cochain(g, 2, 0.1 * np.ones(g.num_cells(2)))
    with pytest.raises(GaugeHypothesisError) as err:
        decompose(om, F)
    assert err.value.residual > err.value.limit


def test_reconstruct_potential_rejects_non_closed(rng):
    g = build_grid(2, 6, 1 / 6)
    with pytest.raises(NotClosedError):
        reconstruct_potential(codifferential(Cochain(g, 2, rng.standard_normal(g.num_cells(2)))))


def test_reconstruct_potential_rejects_harmonic():
    g = build_grid(2, 6, 1 / 6, "torus")
    with pytest.raises(NotClosedError):
        reconstruct_potential(constant_form(g, 1, {(0,): 1.0}))


def test_reconstruct_potential_recovers_mean_zero(rng):
    g = build_grid(3, 4, 0.25)
    phi = rng.standard_normal(g.num_cells(0))
    phi -= np.average(phi, weights=g.mass(0))
    rec = reconstruct_potential(exterior_d(Cochain(g, 0, phi)))
    assert np.allclose(rec.values[:, 0, 0], phi, atol=1e-10)


def test_three_dimensional_psi_closed(rng):
    g = build_grid(3, 4, 0.25)
    om = rough_connection(g, rng)
    split = decompose(om, curvature(om))
    assert split.closedness < 1e-12
