"""Hodge Laplacian ``d d* + d* d`` on k-cochains and its solution operator.

The operator is assembled in symmetric form ``S = M @ Laplacian`` with the
diagonal Hodge mass ``M``.  On a box every primal cell is a degree of
freedom, which yields the absolute boundary conditions (vanishing normal
trace of the form and of its exterior derivative) as natural conditions.
On a torus the conditions are periodic and the constant k-forms span the
kernel.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cochains import Cochain
from .grid import Grid

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DIRECT_LIMIT = 20_000

ABSOLUTE = "absolute"
PERIODIC = "periodic"


class SolverError(RuntimeError):
    """Raised when an iterative solve misses its tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class SolveReport:
    iterations: int
    residual: float
    harmonic_removed: bool
    harmonic_norm: float = 0.0
    method: str = "direct"

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "harmonic_removed": self.harmonic_removed,
            "harmonic_norm": self.harmonic_norm,
            "method": self.method,
        }


@dataclass(eq=False)
class HodgeLaplacian:
    grid: Grid
    k: int
    bc: str
    stiffness: sp.csr_matrix
    mass: np.ndarray
    harmonic: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dimension(self) -> int:
        return self.stiffness.shape[0]

    @property
    def kernel_dim(self) -> int:
        return self.harmonic.shape[1]

    def matrix(self) -> sp.csr_matrix:
        """The (non-symmetric) operator ``M^-1 S``."""
        return sp.diags(1.0 / self.mass) @ self.stiffness

    def apply(self, u: Cochain) -> Cochain:
        flat = u.values.reshape(u.values.shape[0], -1)
        out = (self.stiffness @ flat) / self.mass[:, None]
        return u.like(out.reshape(u.values.shape))

    def project_harmonic(self, flat: np.ndarray) -> np.ndarray:
        """Coefficients of the M-orthogonal projection onto the kernel."""
        if self.kernel_dim == 0:
            return np.zeros((0, flat.shape[1]))
        return self.harmonic.T @ (self.mass[:, None] * flat)

    def _bordered_lu(self):
        if "bordered" not in self._cache:
            mh = self.mass[:, None] * self.harmonic
            mat = sp.bmat(
                [[self.stiffness, sp.csr_matrix(mh)], [sp.csr_matrix(mh.T), None]],
                format="csc",
            )
            self._cache["bordered"] = spla.splu(mat)
        return self._cache["bordered"]

    def _shifted_lu(self, sigma: float):
        key = ("shift", sigma)
        if key not in self._cache:
            mat = (self.stiffness + sigma * sp.diags(self.mass)).tocsc()
            self._cache[key] = spla.splu(mat)
        return self._cache[key]


def _harmonic_basis(grid: Grid, k: int, mass: np.ndarray) -> np.ndarray:
    cols = []
    if grid.periodic:
        for axes in combinations(range(grid.n), k):
            v = np.zeros(grid.num_cells(k))
            v[grid.block(k, axes).slice] = grid.h ** k
            cols.append(v)
    elif k == 0:
        cols.append(np.ones(grid.num_cells(0)))
    if not cols:
        return np.zeros((grid.num_cells(k), 0))
    basis = np.array(cols).T
    for j in range(basis.shape[1]):
        basis[:, j] /= np.sqrt(np.sum(mass * basis[:, j] ** 2))
    return basis


@lru_cache(maxsize=64)
def assemble(grid: Grid, k: int, bc: str | None = None) -> HodgeLaplacian:
    """Assemble the Hodge Laplacian on k-cochains."""
    if bc is None:
        bc = PERIODIC if grid.periodic else ABSOLUTE
    if bc not in (ABSOLUTE, PERIODIC):
        raise ValueError(f"unknown boundary condition {bc!r}")
    if (bc == PERIODIC) != grid.periodic:
        raise ValueError(f"boundary condition {bc!r} does not fit a {grid.topology}")
    if not 0 <= k <= grid.n:
        raise ValueError(f"degree {k} outside 0..{grid.n}")
    mass = grid.mass(k)
    mk = sp.diags(mass)
    stiff = sp.csr_matrix((grid.num_cells(k), grid.num_cells(k)))
    if k > 0:
        d = grid.coboundary(k - 1).astype(float)
        inv_prev = sp.diags(1.0 / grid.mass(k - 1))
        stiff = stiff + mk @ d @ inv_prev @ d.T @ mk
    if k < grid.n:
        d = grid.coboundary(k).astype(float)
        stiff = stiff + d.T @ sp.diags(grid.mass(k + 1)) @ d
    stiff = sp.csr_matrix(0.5 * (stiff + stiff.T))
    return HodgeLaplacian(grid, k, bc, stiff, mass, _harmonic_basis(grid, k, mass))


def _mnorm(mass, flat):
    return float(np.sqrt(np.sum(mass[:, None] * flat * flat)))


def solve(L: HodgeLaplacian, f: Cochain, tol: float = DEFAULT_TOL, maxiter: int | None = None):
    """Minimum-norm solution of ``Laplacian u = f`` after removing the kernel part.

    Returns ``(u, SolveReport)``.  The harmonic part of ``f`` is projected
    out first and recorded in the report.
    """
    if f.degree != L.k or f.grid != L.grid:
        raise ValueError("right-hand side does not match the operator")
    shape = f.values.shape
    flat = f.values.reshape(shape[0], -1)
    coef = L.project_harmonic(flat)
    removed = L.harmonic @ coef if L.kernel_dim else np.zeros_like(flat)
    f_perp = flat - removed
    harmonic_norm = _mnorm(L.mass, removed)
    rhs_norm = _mnorm(L.mass, f_perp)
    # round-off in the projection is not a harmonic component
    had_harmonic = harmonic_norm > 1e-13 * max(_mnorm(L.mass, flat), 1e-300)
    if rhs_norm <= 1e-300:
        report = SolveReport(0, 0.0, had_harmonic, harmonic_norm)
        return f.like(np.zeros(shape)), report

    rhs = L.mass[:, None] * f_perp
    if L.dimension <= DIRECT_LIMIT:
        lu = L._bordered_lu()
        full = np.vstack([rhs, np.zeros((L.kernel_dim, rhs.shape[1]))])
        u = lu.solve(full)[: L.dimension]
        iterations, method = 1, "direct"
    else:
        u, iterations = _cg_columns(L, rhs, tol, maxiter)
        method = "cg"
    if L.kernel_dim:
        u = u - L.harmonic @ L.project_harmonic(u)
    resid = (L.stiffness @ u) / L.mass[:, None] - f_perp
    rel = _mnorm(L.mass, resid) / rhs_norm
    if rel > tol:
        raise SolverError("Hodge Laplacian solve did not reach tolerance", rel)
    report = SolveReport(iterations, rel, had_harmonic, harmonic_norm, method)
    return f.like(u.reshape(shape)), report


def _cg_columns(L: HodgeLaplacian, rhs: np.ndarray, tol: float, maxiter):
    diag = L.stiffness.diagonal()
    diag = np.where(diag > 0, diag, 1.0)
    precond = spla.LinearOperator(L.stiffness.shape, matvec=lambda x: x / diag)
    out = np.zeros_like(rhs)
    total = 0
    for j in range(rhs.shape[1]):
        if not np.any(rhs[:, j]):
            continue
        count = [0]

        def cb(_):
            count[0] += 1

        x, info = spla.cg(
            L.stiffness, rhs[:, j], rtol=0.05 * tol, maxiter=maxiter or 20 * L.dimension,
            M=precond, callback=cb,
        )
        if info > 0:
            resid = np.linalg.norm(L.stiffness @ x - rhs[:, j]) / np.linalg.norm(rhs[:, j])
            raise SolverError("conjugate gradient did not converge", resid)
        out[:, j] = x
        total = max(total, count[0])
    return out, total


def shifted_solve(f: Cochain) -> Cochain:
    """Solve ``(Laplacian + 1) u = f``; always uniquely solvable."""
    L = assemble(f.grid, f.degree)
    lu = L._shifted_lu(1.0)
    flat = f.values.reshape(f.values.shape[0], -1)
    u = lu.solve(L.mass[:, None] * flat)
    return f.like(u.reshape(f.values.shape))


def smallest_eigenvalues(
    L: HodgeLaplacian, count: int = 1, tol: float = DEFAULT_TOL, maxiter: int = 500
) -> np.ndarray:
    """Smallest nonzero eigenvalues via deflated shifted subspace inverse iteration."""
    n = L.dimension
    block = min(max(2 * count, count + 3), n - L.kernel_dim)
    if block < count:
        raise ValueError("operator too small for the requested eigenvalues")
    sigma = 1.0 / max(L.grid.lengths) ** 2
    lu = L._shifted_lu(sigma)
    rng = np.random.default_rng(12345)
    x = rng.standard_normal((n, block))
    prev = None
    for it in range(maxiter):
        if L.kernel_dim:
            x = x - L.harmonic @ L.project_harmonic(x)
        x = lu.solve(L.mass[:, None] * x)
        if L.kernel_dim:
            x = x - L.harmonic @ L.project_harmonic(x)
        # M-orthonormalize, then Rayleigh-Ritz
        sq = np.sqrt(L.mass)[:, None]
        q, _ = np.linalg.qr(sq * x)
        x = q / sq
        a = x.T @ (L.stiffness @ x)
        a = 0.5 * (a + a.T)
        vals, vecs = np.linalg.eigh(a)
        x = x @ vecs
        if prev is not None and np.all(
            np.abs(vals[:count] - prev[:count]) <= tol * np.abs(vals[:count])
        ):
            resid = (L.stiffness @ x[:, :count]) - L.mass[:, None] * x[:, :count] * vals[:count]
            rel = np.linalg.norm(resid, axis=0) / np.maximum(vals[:count], 1e-300)
            if np.all(rel < np.sqrt(tol) * 10):
                return vals[:count]
        prev = vals
    raise SolverError("inverse iteration did not converge", float("nan"))
