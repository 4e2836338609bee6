"""Measured constants: Poincare, Gaffney, the fixed-point operator bound, thresholds."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .cochains import (
    Cochain,
    LieAlgebra,
    codifferential,
    exterior_d,
    mollify,
    norm,
    wedge,
)
from .elliptic import DEFAULT_TOL, assemble, smallest_eigenvalues, solve
from .grid import Grid

SAFETY = 1.5
MIN_PROBES = 32
# strict margin for the closedness condition mu * k / (1 - k) < 1
CLOSEDNESS_MARGIN = 0.99


@dataclass(frozen=True)
class ConstantsCertificate:
    mu: float
    gaffney: float
    K1: float
    probes: int
    kappa1: float
    kappa0: float
    kappa0_precap: float
    grid_hash: str
    p: float
    algebra: str
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConstantsCertificate":
        return cls(**d)


def poincare_constant(grid: Grid, k: int = 0, bc: str | None = None, tol: float = DEFAULT_TOL) -> float:
    """``1 / sqrt(lambda_1)`` for the smallest nonzero Hodge Laplacian eigenvalue."""
    lam = smallest_eigenvalues(assemble(grid, k, bc), 1, tol)[0]
    return float(1.0 / np.sqrt(lam))


def _exact_spectrum_floor(grid: Grid, k: int) -> float:
    # nonzero spectrum of d d* on exact k-forms = that of d* d on (k-1)-forms
    d = grid.coboundary(k - 1).toarray().astype(float)
    inv_sqrt = 1.0 / np.sqrt(grid.mass(k - 1))
    a = inv_sqrt[:, None] * (d.T * grid.mass(k)) @ d * inv_sqrt[None, :]
    vals = sla.eigh(0.5 * (a + a.T), eigvals_only=True)
    return float(vals[vals > 1e-9 * vals.max()].min())


def gaffney_constant(grid: Grid, k: int | None = None, tol: float = DEFAULT_TOL) -> float:
    """Best ``C`` in ``|xi|_{W^{1,2}} <= C |d* xi|_{L^2}`` for exact, harmonic-free ``xi``.

    The default degree is the top degree, where every form is exact; other
    degrees use a dense eigen-solve and are meant for small grids.
    """
    k = grid.n if k is None else k
    if not 1 <= k <= grid.n:
        raise ValueError(f"degree {k} outside 1..{grid.n}")
    if k == grid.n:
        lam = smallest_eigenvalues(assemble(grid, k), 1, tol)[0]
    else:
        lam = _exact_spectrum_floor(grid, k)
    return float(np.sqrt(1.0 + 1.0 / lam))


def _probe_field(grid: Grid, k: int, algebra: LieAlgebra, rng, smooth: bool) -> Cochain:
    vals = algebra.random(rng, grid.num_cells(k)) * grid.h ** k
    field = Cochain(grid, k, vals, algebra)
    if smooth:
        field = mollify(field, 3.0 * grid.h)
    return field


def _unit(field: Cochain, p: float, kind: str) -> Cochain:
    size = norm(field, p, kind).value
    return field * (1.0 / size) if size > 0 else field


def probe_ratio(F: Cochain, phi: Cochain, zeta: Cochain, p: float) -> float:
    """One sample of ``|T zeta|_{W1p} / (|F|_{W-1p} + |phi|^2_{W1p} + |zeta|^2_{W1p})``."""
    conn = exterior_d(phi) + codifferential(zeta)
    out, _ = solve(assemble(F.grid, 2), F - wedge(conn, conn))
    denom = (
        norm(F, p, "Wminus1p").value
        + norm(phi, p, "W1p").value ** 2
        + norm(zeta, p, "W1p").value ** 2
    )
    return norm(out, p, "W1p").value / denom


def probe_ratios(
    grid: Grid, p: float, probes: int = MIN_PROBES, seed: int = 0, algebra: LieAlgebra | None = None
) -> np.ndarray:
    """Ratios for a reproducible probe stream.

    Probe ``i`` draws from its own child of ``SeedSequence(seed)``, so a
    longer run extends a shorter one.  Even probes are pure elliptic (unit
    ``F``, zero ``phi`` and ``zeta``); odd probes scale a unit triple by
    random factors.  Every other pair is smoothed.
    """
    if probes < MIN_PROBES:
        raise ValueError(f"need at least {MIN_PROBES} probes, got {probes}")
    algebra = algebra or LieAlgebra("su2", 4)
    children = np.random.SeedSequence(seed).spawn(probes)
    out = np.empty(probes)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        smooth = (i // 2) % 2 == 0
        F = _unit(_probe_field(grid, 2, algebra, rng, smooth), p, "Wminus1p")
        phi = _unit(_probe_field(grid, 0, algebra, rng, smooth), p, "W1p")
        zeta = _unit(_probe_field(grid, 2, algebra, rng, smooth), p, "W1p")
        if i % 2 == 0:
            phi, zeta = phi * 0.0, zeta * 0.0
        else:
            a, b, c = rng.uniform(0.05, 1.0, size=3)
            F, phi, zeta = F * a, phi * b, zeta * c
        out[i] = probe_ratio(F, phi, zeta, p)
    return out


def elliptic_constant(
    grid: Grid, p: float, probes: int = MIN_PROBES, seed: int = 0, algebra: LieAlgebra | None = None
) -> float:
    """Largest probed ratio times a safety factor."""
    return float(SAFETY * probe_ratios(grid, p, probes, seed, algebra).max())


def thresholds(K1: float, mu: float | None = None, C2: float | None = None) -> tuple[float, float]:
    """Return ``(kappa1, kappa0)``.

    ``kappa1 = 1/(3 K1)`` and ``kappa0 <= kappa1/(6 K1)``, capped at 1.  When
    ``mu`` is given, ``kappa0`` is further reduced so that
    ``kappa0' = 3 C2 kappa0`` satisfies ``mu kappa0' / (1 - kappa0') < 1``.
    """
    if K1 <= 0:
        raise ValueError("K1 must be positive")
    kappa1 = 1.0 / (3.0 * K1)
    kappa0 = min(1.0, kappa1 / (6.0 * K1))
    if mu is not None:
        c2 = K1 if C2 is None else C2
        kappa0 = min(kappa0, CLOSEDNESS_MARGIN / (3.0 * c2 * (1.0 + mu)))
    return kappa1, kappa0


def closedness_margin(mu: float, kappa0_prime: float) -> float:
    """``1 - mu k / (1 - k)``; positive means the closedness argument applies."""
    if kappa0_prime >= 1.0:
        return -np.inf
    return 1.0 - mu * kappa0_prime / (1.0 - kappa0_prime)


def certify(
    grid: Grid,
    p: float,
    probes: int = MIN_PROBES,
    seed: int = 0,
    algebra: LieAlgebra | None = None,
) -> ConstantsCertificate:
    algebra = algebra or LieAlgebra("su2", 4)
    mu = poincare_constant(grid, 0)
    gaff = gaffney_constant(grid)
    K1 = elliptic_constant(grid, p, probes, seed, algebra)
    kappa1, kappa0 = thresholds(K1, mu)
    _, precap = thresholds(K1)
    return ConstantsCertificate(
        mu=mu,
        gaffney=gaff,
        K1=K1,
        probes=probes,
        kappa1=kappa1,
        kappa0=kappa0,
        kappa0_precap=precap,
        grid_hash=grid.hash,
        p=float(p),
        algebra=algebra.flavor,
        seed=int(seed),
    )
