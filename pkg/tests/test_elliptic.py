import numpy as np
import pytest

from gaugesmooth import Cochain, SolverError, assemble, build_grid, inner, solve
from gaugesmooth.elliptic import DIRECT_LIMIT, shifted_solve, smallest_eigenvalues


def fourier_symbol(k1, k2, N, h):
    return sum(4 / h ** 2 * np.sin(np.pi * k / N) ** 2 for k in (k1, k2))


def test_torus_scalar_solve_matches_fourier():
    N = 16
    g = build_grid(2, N, 1 / N, "torus")
    x = g.cell_centers(0)
    mode = np.cos(2 * np.pi * (2 * x[:, 0] + x[:, 1]))
    f = Cochain(g, 0, mode)
    u, rep = solve(assemble(g, 0), f)
    assert np.allclose(u.values[:, 0, 0], mode / fourier_symbol(2, 1, N, 1 / N), atol=1e-12)
    assert rep.method == "direct"


def test_solve_removes_harmonic_part_and_reports_it():
    g = build_grid(2, 8, 1 / 8, "torus")
    f = Cochain(g, 0, np.ones(g.num_cells(0)) + np.sin(np.arange(g.num_cells(0))))
    u, rep = solve(assemble(g, 0), f)
    assert rep.harmonic_removed and rep.harmonic_norm > 0.5
    assert abs(np.sum(u.values)) < 1e-10


def test_solution_orthogonal_to_kernel(rng):
    g = build_grid(2, 6, 1 / 6, "torus")
    L = assemble(g, 1)
    assert L.kernel_dim == 2
    f = Cochain(g, 1, rng.standard_normal(g.num_cells(1)))
    u, _ = solve(L, f)
    assert np.max(np.abs(L.project_harmonic(u.values.reshape(-1, 1)))) < 1e-12


@pytest.mark.parametrize("topo,n,k", [("box", 2, 1), ("box", 3, 2), ("torus", 3, 1), ("box", 2, 2)])
def test_residual_small(topo, n, k, rng):
    g = build_grid(n, 5, 0.2, topo)
    L = assemble(g, k)
    f = Cochain(g, k, rng.standard_normal((g.num_cells(k), 2, 2)))
    u, rep = solve(L, f)
    assert rep.residual <= 1e-10


def test_laplacian_is_symmetric_positive_semidefinite(rng):
    g = build_grid(3, 3, 1 / 3)
    for k in range(4):
        L = assemble(g, k)
        S = L.stiffness.toarray()
        assert np.allclose(S, S.T)
        a = Cochain(g, k, rng.standard_normal(g.num_cells(k)))
        assert inner(a, L.apply(a)) >= -1e-12


def test_cg_path_agrees_with_direct(rng, monkeypatch):
    from gaugesmooth import elliptic

    g = build_grid(2, 10, 0.1)
    L = assemble(g, 1)
    f = Cochain(g, 1, rng.standard_normal(g.num_cells(1)))
    direct, _ = solve(L, f, 1e-12)
    monkeypatch.setattr(elliptic, "DIRECT_LIMIT", 0)
    iterative, rep = solve(L, f, 1e-12)
    assert rep.method == "cg"
    assert np.allclose(direct.values, iterative.values, atol=1e-8)
    assert DIRECT_LIMIT > 0


def test_cg_failure_raises_solver_error(rng, monkeypatch):
    from gaugesmooth import elliptic

    g = build_grid(2, 12, 1 / 12)
    L = assemble(g, 0)
    monkeypatch.setattr(elliptic, "DIRECT_LIMIT", 0)
    f = Cochain(g, 0, rng.standard_normal(g.num_cells(0)))
    with pytest.raises(SolverError) as err:
        solve(L, f, 1e-14, maxiter=2)
    assert err.value.residual > 1e-14


def test_unit_torus_first_eigenvalue():
    N = 32
    g = build_grid(2, N, 1 / N, "torus")
    lam = smallest_eigenvalues(assemble(g, 0), 2)
    assert lam[0] == pytest.approx(fourier_symbol(1, 0, N, 1 / N), rel=1e-9)
    assert lam[1] == pytest.approx(lam[0], rel=1e-8)  # multiplicity


def test_box_neumann_first_eigenvalue():
    N = 32
    g = build_grid(2, N, 1 / N)
    lam = smallest_eigenvalues(assemble(g, 0), 1)[0]
    assert lam == pytest.approx(4 * N ** 2 * np.sin(np.pi / (2 * N)) ** 2, rel=1e-8)


def test_box_two_forms_match_scalar_dirichlet_spectrum():
    g = build_grid(2, 24, 1 / 24)
    lam = smallest_eigenvalues(assemble(g, 2), 1)[0]
    assert lam == pytest.approx(2 * np.pi ** 2, rel=2e-2)


def test_shifted_solve_inverts_shifted_operator(rng):
    g = build_grid(2, 6, 1 / 6)
    L = assemble(g, 1)
    f = Cochain(g, 1, rng.standard_normal(g.num_cells(1)))
    u = shifted_solve(f)
    assert np.allclose((L.apply(u) + u).values, f.values, atol=1e-10)
