"""Reproducible problem instances.

``abelian-rough``
    Scalar connection ``d phi + d* psi`` with white-noise ``phi`` and a fixed
    smooth ``psi``, rescaled to a requested ``L^p`` norm.
``su2-small``
    su(2) connection with a white-noise exact part whose curvature is a
    prescribed smooth field.  The coexact part is obtained from the same
    fixed-point problem the smoothing engine solves, at the rough potential.
``sphere-patch``
    Fundamental forms of a graph chart of the round sphere.
``sin-oscillation``
    Noncommuting matrices for the oscillating family.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cochains import (
    Cochain,
    LieAlgebra,
    codifferential,
    curvature,
    exterior_d,
    from_blocks,
    norm,
)
from .constants import ConstantsCertificate, certify
from .grid import Grid, build_grid
from .smoothing import SmoothingConfig, fixed_point_solve

FIXTURE_KINDS = ("abelian-rough", "su2-small", "sphere-patch", "sin-oscillation")


@dataclass
class Problem:
    omega: Cochain
    F: Cochain
    certificate: ConstantsCertificate
    config: SmoothingConfig

    @property
    def grid(self) -> Grid:
        return self.omega.grid


def _smooth_two_form(grid: Grid, mat: np.ndarray) -> Cochain:
    X, Y = grid.block_coords(2, (0, 1))
    sx, sy = (X - grid.origin[0]) / grid.lengths[0], (Y - grid.origin[1]) / grid.lengths[1]
    dens = np.sin(np.pi * sx) * np.sin(np.pi * sy) * grid.h ** 2
    return from_blocks(grid, 2, {(0, 1): dens[..., None, None] * mat}, shape=mat.shape)


def abelian_rough(seed: int = 0, N: int = 16, p: float = 4.0, ratio: float = 0.5,
                  cert: ConstantsCertificate | None = None, probes: int = 32) -> Problem:
    grid = build_grid(2, N, 1.0 / N)
    algebra = LieAlgebra("u1", 1)
    cert = cert or certify(grid, p, probes, seed, algebra)
    rng = np.random.default_rng(seed)
    phi = Cochain(grid, 0, rng.standard_normal(grid.num_cells(0)), algebra)
    psi = _smooth_two_form(grid, np.eye(1))
    psi = Cochain(grid, 2, psi.values, algebra)
    exact = exterior_d(phi)
    coexact = codifferential(psi)
    # equal L^p weight for the two parts before rescaling
    omega = exact * (1.0 / norm(exact, p).value) + coexact * (1.0 / norm(coexact, p).value)
    omega = omega * (ratio * cert.kappa0 / norm(omega, p).value)
    cfg = SmoothingConfig(p=p).with_certificate(cert)
    return Problem(omega, curvature(omega), cert, cfg)


def su2_small(seed: int = 7, N: int = 16, p: float = 4.0, ratio: float = 0.5,
              cert: ConstantsCertificate | None = None, probes: int = 32,
              curvature_share: float = 0.4) -> Problem:
    """Rough su(2) connection with smooth curvature and ``|omega|_{L^p} = ratio * kappa0``."""
    grid = build_grid(2, N, 1.0 / N)
    algebra = LieAlgebra("su2", 4)
    cert = cert or certify(grid, p, probes, seed, algebra)
    rng = np.random.default_rng(seed)
    phi = Cochain(grid, 0, algebra.random(rng, grid.num_cells(0)), algebra)
    phi = phi * (1.0 / norm(exterior_d(phi), p).value)
    F0 = _smooth_two_form(grid, algebra.basis()[0])
    F0 = Cochain(grid, 2, F0.values, algebra)
    F0 = F0 * (1.0 / norm(F0, p).value)
    cfg = SmoothingConfig(p=p, fp_tol=1e-14).with_certificate(cert)
    target = ratio * cert.kappa0

    def build(scale):
        ph = phi * scale
        F = F0 * (curvature_share * scale)
        psi, _ = fixed_point_solve(ph, F, cfg)
        return exterior_d(ph) + codifferential(psi)

    scale = target
    for _ in range(6):
        omega = build(scale)
        scale *= target / norm(omega, p).value
    omega = build(scale)
    return Problem(omega, curvature(omega), cert, SmoothingConfig(p=p).with_certificate(cert))


def sphere_patch(N: int = 64, radius: float = 1.0, second_form_scale: float = 1.0):
    from .pfaff import sphere_patch as patch

    return patch(N, radius, second_form_scale=second_form_scale)


def sin_oscillation() -> tuple[np.ndarray, np.ndarray]:
    """A pair with ``[A, B] = diag(1, -1)``."""
    return np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])
