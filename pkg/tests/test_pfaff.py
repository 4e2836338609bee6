import numpy as np
import pytest

from gaugesmooth import build_grid, constant_form
from gaugesmooth.cochains import LieAlgebra
from gaugesmooth.pfaff import (
    adapted_tangent_normal,
    assemble_cartan,
    clifford_patch,
    compatibility_residuals,
    cylinder_patch,
    flat_patch,
    integrate_pfaff,
    kabsch_align,
    orthonormal_frame,
    reconstruct,
    sphere_patch,
)


def test_orthonormal_frame_diagonalizes_metric(rng):
    a = rng.standard_normal((20, 2, 2))
    metric = np.einsum("vij,vkj->vik", a, a) + np.eye(2)
    E = orthonormal_frame(metric).frame
    assert np.allclose(np.einsum("vdi,vde,vej->vij", E, metric, E), np.eye(2), atol=1e-12)


def test_flat_patch_is_trivial():
    data = flat_patch(8)
    omega, res, frames, surf = reconstruct(data)
    assert np.max(np.abs(omega.values)) < 1e-14
    assert res.gauss == 0 and frames.holonomy < 1e-14
    assert surf.aligned_error < 1e-12


def test_so2_rotation_oracle():
    g = build_grid(2, 8, 1 / 8)
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    a, b = 0.7, -0.3
    om = constant_form(g, 1, {(0,): a * J, (1,): b * J}, LieAlgebra("so", 2))
    field = integrate_pfaff(om)
    x = g.cell_centers(0)
    theta = a * x[:, 0] + b * x[:, 1]
    theta -= theta[0]
    expected = np.stack([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    expected = np.moveaxis(expected, -1, 0)  # exp(-theta J)
    assert np.allclose(field.frames, expected, atol=1e-12)
    assert field.holonomy < 1e-13 and field.mismatch < 1e-13


@pytest.mark.parametrize("maker", [cylinder_patch, clifford_patch], ids=["cylinder", "clifford"])
def test_flat_intrinsic_patches_exact(maker):
    coarse = reconstruct(maker(16))
    fine = reconstruct(maker(32))
    assert coarse[1].gauss < 1e-12 and coarse[1].codazzi < 1e-12
    assert fine[2].orthogonality_defect() < 1e-12
    assert 3 < coarse[3].aligned_error / fine[3].aligned_error < 5


def test_adapted_block_is_shape_operator():
    R = 2.0
    data = sphere_patch(16, R)
    block = adapted_tangent_normal(data)
    assert np.allclose(block, np.eye(2) / R, atol=1e-12)


def test_sphere_residuals_shrink_and_gauss_perturbation_does_not():
    r32 = compatibility_residuals(sphere_patch(32))
    r64 = compatibility_residuals(sphere_patch(64))
    assert r64.gauss < r32.gauss / 2
    assert r64.first_structure < r32.first_structure / 3
    bad32 = compatibility_residuals(sphere_patch(32, second_form_scale=1.1))
    bad64 = compatibility_residuals(sphere_patch(64, second_form_scale=1.1))
    assert bad64.gauss > 0.9 * bad32.gauss > 0.05 * 0.21


def test_sphere_reconstruction_converges():
    e = [reconstruct(sphere_patch(N))[3].aligned_error for N in (32, 64)]
    assert e[1] < 5e-3
    assert 3 < e[0] / e[1] < 5


def test_tree_and_lsq_agree_to_discretization_error():
    data = sphere_patch(32)
    tree = reconstruct(data, mode="tree")[3]
    lsq = reconstruct(data, mode="lsq")[3]
    assert abs(tree.aligned_error - lsq.aligned_error) < 5e-3
    with pytest.raises(ValueError):
        reconstruct(data, mode="spiral")


def test_kabsch_recovers_rigid_motion(rng):
    pts = rng.standard_normal((30, 3))
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    moved = pts @ q + np.array([1.0, -2.0, 0.5])
    assert np.allclose(kabsch_align(moved, pts), pts, atol=1e-12)


def test_cartan_connection_is_skew():
    om = assemble_cartan(sphere_patch(16))
    assert np.allclose(om.values, -np.swapaxes(om.values, 1, 2), atol=1e-14)
