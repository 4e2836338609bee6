from math import comb

import numpy as np
import pytest

from gaugesmooth import build_grid, sub_box, trace_mask
from gaugesmooth.grid import Grid, expected_cell_count


@pytest.mark.parametrize("n,N,topo", [(2, 5, "box"), (2, 6, "torus"), (3, 3, "box"), (3, 4, "torus")])
def test_cell_counts(n, N, topo):
    g = build_grid(n, N, 1.0 / N, topo)
    for k in range(n + 1):
        assert g.num_cells(k) == expected_cell_count(n, [N] * n, k, topo)
        if k:
            assert g.coboundary(k - 1).shape == (g.num_cells(k), g.num_cells(k - 1))


def test_box_counts_by_hand():
    g = build_grid(2, 3, 1.0 / 3)
    assert [g.num_cells(k) for k in range(3)] == [16, 24, 9]
    t = build_grid(2, 3, 1.0 / 3, "torus")
    assert [t.num_cells(k) for k in range(3)] == [9, 18, 9]


@pytest.mark.parametrize("topo", ["box", "torus"])
def test_euler_characteristic(topo):
    g = build_grid(3, 4, 0.25, topo)
    chi = sum((-1) ** k * g.num_cells(k) for k in range(4))
    assert chi == (1 if topo == "box" else 0)


@pytest.mark.parametrize("n,topo", [(2, "box"), (2, "torus"), (3, "box"), (3, "torus")])
def test_coboundary_squares_to_zero(n, topo):
    g = build_grid(n, 4, 0.25, topo)
    for k in range(n - 1):
        prod = g.coboundary(k + 1) @ g.coboundary(k)
        assert prod.count_nonzero() == 0 or np.all(prod.data == 0)


def test_coboundary_entries_are_signs():
    g = build_grid(3, 3, 1 / 3)
    for k in range(3):
        d = g.coboundary(k)
        assert d.dtype == np.int64
        assert set(np.unique(d.data)) <= {-1, 1}
        assert np.all(np.diff(d.indptr) == 2 * (k + 1))


def test_hash_and_descriptor_round_trip():
    g = build_grid(2, (8, 4), 0.125, "torus", (0.5, -1.0))
    again = Grid.from_descriptor(g.descriptor())
    assert again == g and again.hash == g.hash
    assert build_grid(2, (8, 4), 0.125).hash != g.hash


def test_trace_mask_small_box():
    g = build_grid(2, 2, 0.5)
    tm = trace_mask(g)
    # 8 of 9 vertices and 8 of 12 edges lie on the boundary square
    assert tm.tangential[0].size == 8
    assert tm.tangential[1].size == 8
    assert tm.normal[1].size == 4
    assert trace_mask(build_grid(2, 4, 0.25, "torus")).is_empty()


def test_sub_box_maps_preserve_coboundary():
    g = build_grid(2, 8, 0.125)
    sub, maps = sub_box(g, (2, 1), (6, 5))
    assert sub.counts == (4, 4)
    assert np.allclose(sub.origin, (0.25, 0.125))
    d_parent = g.coboundary(0)[maps[1]][:, maps[0]]
    assert (d_parent != sub.coboundary(0)).nnz == 0


def test_sub_box_rejects_degenerate():
    g = build_grid(2, 8, 0.125)
    with pytest.raises(ValueError):
        sub_box(g, (0, 0), (1, 4))
    with pytest.raises(ValueError):
        sub_box(g, (0, 0), (9, 4))


def test_mass_is_positive_and_sums_to_volume():
    for topo in ("box", "torus"):
        g = build_grid(3, 4, 0.5, topo)
        for k in range(4):
            # total dual volume of k-cells times primal volume = C(n,k) * |domain|
            total = np.sum(g.dual_fraction(k)) * g.h ** g.n
            assert total == pytest.approx(comb(3, k) * g.volume)
            assert np.all(g.mass(k) > 0)
