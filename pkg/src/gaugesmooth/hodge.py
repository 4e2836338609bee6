"""Split a connection into exact, coexact and harmonic parts.

Given a 1-cochain ``omega`` whose discrete curvature equals ``F``, find a
0-cochain ``phi`` and a 2-cochain ``psi`` with
``omega = d phi + d* psi + eta``, where ``eta`` is the harmonic part (only
nonzero on a torus).  ``psi`` solves ``Laplacian psi = F - omega ^ omega``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cochains import Cochain, codifferential, curvature, exterior_d, norm, wedge
from .elliptic import DEFAULT_TOL, SolveReport, assemble, solve

GAUGE_TOL = 1e-8


class GaugeHypothesisError(ValueError):
    """The supplied curvature is not the curvature of the supplied connection."""

    def __init__(self, residual: float, limit: float):
        super().__init__(
            f"curvature(omega) differs from F by {residual:.3e} (allowed {limit:.3e})"
        )
        self.residual = residual
        self.limit = limit


class NotClosedError(ValueError):
    """A 1-cochain that should be exact is not closed or carries cohomology."""

    def __init__(self, what: str, residual: float):
        super().__init__(f"{what}: residual {residual:.3e}")
        self.residual = residual


@dataclass(frozen=True)
class HodgeSplit:
    phi: Cochain
    psi: Cochain
    eta: Cochain
    residual: float
    closedness: float
    psi_solve: SolveReport

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "closedness": self.closedness,
            "psi_solve": self.psi_solve.to_dict(),
        }


def harmonic_part(alpha: Cochain) -> Cochain:
    """M-orthogonal projection onto the discrete harmonic k-forms."""
    L = assemble(alpha.grid, alpha.degree)
    flat = alpha.values.reshape(alpha.values.shape[0], -1)
    if L.kernel_dim == 0:
        return alpha.like(np.zeros_like(alpha.values))
    proj = L.harmonic @ L.project_harmonic(flat)
    return alpha.like(proj.reshape(alpha.values.shape))


def reconstruct_potential(
    alpha: Cochain, tol: float = DEFAULT_TOL, closed_tol: float = GAUGE_TOL
) -> Cochain:
    """Mean-zero ``phi`` with ``d phi = alpha`` for a closed, exact 1-cochain."""
    if alpha.degree != 1:
        raise ValueError("potential reconstruction needs a 1-cochain")
    scale = max(norm(alpha, 2).value, 1.0)
    if alpha.grid.n > 1:
        closed = norm(exterior_d(alpha), 2).value
        if closed > closed_tol * scale:
            raise NotClosedError("input is not closed", closed)
    harm = norm(harmonic_part(alpha), 2).value
    if harm > closed_tol * scale:
        raise NotClosedError("input has a harmonic (non-exact) component", harm)
    phi, _ = solve(assemble(alpha.grid, 0), codifferential(alpha), tol)
    return phi


def decompose(
    omega: Cochain,
    F: Cochain,
    tol: float = DEFAULT_TOL,
    gauge_tol: float = GAUGE_TOL,
    p: float = 2.0,
) -> HodgeSplit:
    """Hodge split of ``omega`` driven by its prescribed curvature ``F``."""
    if omega.degree != 1 or F.degree != 2:
        raise ValueError("decompose needs a 1-cochain and a 2-cochain")
    gap = norm(curvature(omega) - F, 2).value
    limit = gauge_tol * (1.0 + norm(F, 2).value)
    if gap > limit:
        raise GaugeHypothesisError(gap, limit)

    psi, report = solve(assemble(omega.grid, 2), F - wedge(omega, omega), tol)
    eta = harmonic_part(omega)
    rest = omega - codifferential(psi) - eta
    phi = reconstruct_potential(rest, tol, gauge_tol)
    rebuilt = exterior_d(phi) + codifferential(psi) + eta
    residual = norm(rebuilt - omega, p).value
    closedness = norm(exterior_d(psi), 2).value if omega.grid.n > 2 else 0.0
    return HodgeSplit(phi, psi, eta, residual, closedness, report)
