"""Matrix-valued cochains on cubical grids.

Values are stored integrated over cells: a k-cochain sampled from a smooth
form carries units of ``field * h**k``.  Every value is a small matrix, so a
cochain's array has shape ``(num_cells, rows, cols)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import ceil

import numpy as np

from . import _kernels
from .grid import Grid

FLAVORS = ("gl", "so", "u1", "su2")
NORM_KINDS = ("Lp", "W1p", "Wminus1p", "L2grad")


def _quaternion_left() -> np.ndarray:
    li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], float)
    lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], float)
    lk = np.array([[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], float)
    return np.stack([li, lj, lk])


@dataclass(frozen=True)
class LieAlgebra:
    """A matrix Lie algebra: ``gl(m)``, ``so(m)``, ``u(1)`` or ``su(2)``.

    ``su2`` is realized on R^4 by left multiplication with the imaginary
    quaternions, so its matrices are 4x4 and real.
    """

    flavor: str = "gl"
    m: int = 1

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown algebra flavor {self.flavor!r}")
        if self.flavor == "u1" and self.m != 1:
            raise ValueError("u1 is realized with m = 1")
        if self.flavor == "su2" and self.m != 4:
            raise ValueError("su2 is realized as 4x4 real matrices")

    @property
    def is_abelian(self) -> bool:
        return self.flavor == "u1" or (self.flavor == "so" and self.m <= 2) or (
            self.flavor == "gl" and self.m == 1
        )

    def basis(self) -> np.ndarray:
        """Frobenius-orthonormal basis, shape (dim, m, m)."""
        m = self.m
        if self.flavor in ("gl", "u1"):
            return np.eye(m * m).reshape(m * m, m, m)
        if self.flavor == "so":
            out = []
            for i, j in combinations(range(m), 2):
                e = np.zeros((m, m))
                e[i, j], e[j, i] = 1.0, -1.0
                out.append(e / np.sqrt(2.0))
            return np.array(out).reshape(-1, m, m)
        return _quaternion_left() / 2.0

    def project(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.flavor in ("gl", "u1"):
            return x
        if self.flavor == "so":
            return 0.5 * (x - np.swapaxes(x, -1, -2))
        b = self.basis()
        coef = np.einsum("...ij,aij->...a", x, b)
        return np.einsum("...a,aij->...ij", coef, b)

    def random(self, rng: np.random.Generator, size: int) -> np.ndarray:
        b = self.basis()
        coef = rng.standard_normal((size, b.shape[0]))
        return np.einsum("sa,aij->sij", coef, b)

    def to_dict(self) -> dict:
        return {"flavor": self.flavor, "m": self.m}


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    kind: str

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True, eq=False)
class Cochain:
    grid: Grid
    degree: int
    values: np.ndarray
    algebra: LieAlgebra | None = None
    dual: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None, None]
        if vals.ndim != 3:
            raise ValueError(f"values must have shape (cells, r, c), got {vals.shape}")
        primal_k = self.grid.n - self.degree if self.dual else self.degree
        expected = self.grid.num_cells(primal_k)
        if vals.shape[0] != expected:
            raise ValueError(
                f"{self.degree}-cochain needs {expected} cells, got {vals.shape[0]}"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- basic algebra -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def like(self, values, degree=None, dual=None) -> "Cochain":
        return Cochain(
            self.grid,
            self.degree if degree is None else degree,
            values,
            self.algebra,
            self.dual if dual is None else dual,
        )

    def _check_same(self, other: "Cochain") -> None:
        if not isinstance(other, Cochain):
            raise TypeError(f"expected Cochain, got {type(other).__name__}")
        if other.grid != self.grid:
            raise ValueError("cochains live on different grids")
        if other.degree != self.degree or other.dual != self.dual:
            raise ValueError(
                f"degree mismatch: {self.degree} vs {other.degree}"
            )

    def __add__(self, other):
        self._check_same(other)
        return self.like(self.values + other.values)

    def __sub__(self, other):
        self._check_same(other)
        return self.like(self.values - other.values)

    def __neg__(self):
        return self.like(-self.values)

    def __mul__(self, c):
        return self.like(float(c) * self.values)

    __rmul__ = __mul__

    def block(self, axes) -> np.ndarray:
        """Values of one direction-set block, shape ``block_shape + (r, c)``."""
        b = self.grid.block(self.degree, axes)
        return self.values[b.slice].reshape(b.shape + self.shape)

    def restrict(self, sub: Grid, index: np.ndarray) -> "Cochain":
        return Cochain(sub, self.degree, self.values[index], self.algebra, self.dual)


def zeros(grid: Grid, k: int, shape=(1, 1), algebra: LieAlgebra | None = None) -> Cochain:
    return Cochain(grid, k, np.zeros((grid.num_cells(k),) + tuple(shape)), algebra)


def from_blocks(grid: Grid, k: int, blocks: dict, algebra=None, shape=None) -> Cochain:
    """Assemble a cochain from per-direction-set arrays; missing blocks are 0."""
    if shape is None:
        first = np.asarray(next(iter(blocks.values())))
        shape = first.shape[grid.n:] or (1, 1)
    vals = np.zeros((grid.num_cells(k),) + tuple(shape))
    for b in grid.blocks(k):
        if b.axes in blocks:
            arr = np.asarray(blocks[b.axes], float)
            if arr.ndim == grid.n:
                arr = arr[..., None, None]
            arr = np.broadcast_to(arr, b.shape + tuple(shape))
            vals[b.slice] = arr.reshape((b.size,) + tuple(shape))
    return Cochain(grid, k, vals, algebra)


def constant_form(grid: Grid, k: int, coeffs: dict, algebra=None) -> Cochain:
    """Sample a constant k-form ``sum_S coeffs[S] dx^S`` (matrix coefficients)."""
    scale = grid.h ** k
    mats = {ax: np.atleast_2d(scale * np.asarray(c, float)) for ax, c in coeffs.items()}
    shape = next(iter(mats.values())).shape
    full = {
        ax: np.broadcast_to(mat, grid.block(k, ax).shape + shape) for ax, mat in mats.items()
    }
    return from_blocks(grid, k, full, algebra, shape=shape)


def _check_primal(alpha: Cochain) -> None:
    if alpha.dual:
        raise ValueError("operation expects a primal cochain")


def _apply(mat, alpha: Cochain) -> np.ndarray:
    flat = alpha.values.reshape(alpha.values.shape[0], -1)
    out = mat @ flat
    return np.asarray(out).reshape((mat.shape[0],) + alpha.shape)


# ---------------------------------------------------------------------------
# exterior calculus


def exterior_d(alpha: Cochain) -> Cochain:
    _check_primal(alpha)
    if alpha.degree >= alpha.grid.n:
        raise ValueError(f"exterior_d of a top-degree ({alpha.degree}) cochain")
    d = alpha.grid.coboundary(alpha.degree)
    return alpha.like(_apply(d, alpha), degree=alpha.degree + 1)


def hodge_star(alpha: Cochain) -> Cochain:
    """Diagonal Hodge star between primal k-cells and dual (n-k)-cells.

    Dual cochains are indexed by the primal cell they are dual to, so the
    round trip picks up the sign ``(-1)**(k*(n-k))``.
    """
    g = alpha.grid
    if not alpha.dual:
        k = alpha.degree
        mass = g.mass(k)
        return alpha.like(mass[:, None, None] * alpha.values, degree=g.n - k, dual=True)
    k = g.n - alpha.degree
    mass = g.mass(k)
    sign = (-1) ** (k * (g.n - k))
    return alpha.like(sign * alpha.values / mass[:, None, None], degree=k, dual=False)


def codifferential(alpha: Cochain) -> Cochain:
    """Adjoint of ``exterior_d`` in the Hodge inner product."""
    _check_primal(alpha)
    k = alpha.degree
    if k == 0:
        raise ValueError("codifferential of a 0-cochain")
    g = alpha.grid
    d = g.coboundary(k - 1)
    weighted = alpha.like(g.mass(k)[:, None, None] * alpha.values)
    out = _apply(d.T, weighted) / g.mass(k - 1)[:, None, None]
    return alpha.like(out, degree=k - 1)


def inner(alpha: Cochain, beta: Cochain) -> float:
    """Hodge inner product ``sum tr(alpha^T * star beta)``."""
    alpha._check_same(beta)
    _check_primal(alpha)
    mass = alpha.grid.mass(alpha.degree)
    return float(np.einsum("c,cij,cij->", mass, alpha.values, beta.values))


def _shift_take(arr: np.ndarray, axis: int, offset: int, n_out: int, periodic: bool):
    if periodic:
        return np.roll(arr, -offset, axis=axis) if offset else arr
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(offset, offset + n_out)
    return arr[tuple(sl)]


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _face_average(arr, over_axes, target_shape, periodic):
    """Average a block over its translates along ``over_axes`` (0 or +1)."""
    out = arr
    for i in over_axes:
        lo = _shift_take(out, i, 0, target_shape[i], periodic)
        hi = _shift_take(out, i, 1, target_shape[i], periodic)
        out = 0.5 * (lo + hi)
    return out


def wedge(alpha: Cochain, beta: Cochain) -> Cochain:
    """Averaged cubical cup product intertwined with matrix multiplication.

    On a (k+l)-cube with axes ``S`` the value is
    ``sum_{A+B=S} sign(A,B) * mean_B(alpha_A) @ mean_A(beta_B)`` where
    ``mean_B`` averages the two translates of the face along each axis of
    ``B``.  Scalar 1-forms anticommute exactly under this product.
    """
    _check_primal(alpha)
    _check_primal(beta)
    g = alpha.grid
    if beta.grid != g:
        raise ValueError("cochains live on different grids")
    k, l = alpha.degree, beta.degree
    if k + l > g.n:
        raise ValueError(f"wedge degree overflow: {k} + {l} > {g.n}")
    r, q = alpha.shape
    q2, c = beta.shape
    if q != q2:
        raise ValueError(f"matrix shapes {alpha.shape} and {beta.shape} do not chain")
    out = np.zeros((g.num_cells(k + l), r, c))
    for blk in g.blocks(k + l):
        S = blk.axes
        acc = np.zeros((blk.size, r, c))
        for A in combinations(S, k):
            B = tuple(a for a in S if a not in A)
            sign = _perm_sign(A + B)
            fa = _face_average(alpha.block(A), B, blk.shape, g.periodic)
            fb = _face_average(beta.block(B), A, blk.shape, g.periodic)
            _kernels.matmul_acc(
                acc, fa.reshape(blk.size, r, q), fb.reshape(blk.size, q, c), sign
            )
        out[blk.slice] = acc
    algebra = alpha.algebra if alpha.algebra == beta.algebra else None
    return Cochain(g, k + l, out, algebra)


def curvature(omega: Cochain) -> Cochain:
    """Discrete curvature ``d omega + omega ^ omega`` of a 1-cochain."""
    if omega.degree != 1:
        raise ValueError(f"curvature needs a 1-cochain, got degree {omega.degree}")
    return exterior_d(omega) + wedge(omega, omega)


# ---------------------------------------------------------------------------
# norms


def _lp_raw(alpha: Cochain, p: float) -> float:
    g = alpha.grid
    k = alpha.degree
    weights = g.dual_fraction(k) * g.h ** g.n
    pointwise = _kernels.frobenius(alpha.values) / g.h ** k
    return float(np.sum(weights * pointwise ** p) ** (1.0 / p))


def _w1p_raw(alpha: Cochain, p: float) -> float:
    total = _lp_raw(alpha, p) ** p
    if alpha.degree < alpha.grid.n:
        total += _lp_raw(exterior_d(alpha), p) ** p
    if alpha.degree > 0:
        total += _lp_raw(codifferential(alpha), p) ** p
    return float(total ** (1.0 / p))


def norm(alpha: Cochain, p: float = 2.0, kind: str = "Lp") -> NormReport:
    """Discrete L^p, W^{1,p}, W^{-1,p} or gradient-L^2 norm of a cochain.

    ``W1p`` combines ``alpha``, ``d alpha`` and ``d* alpha`` in l^p; at p = 2
    this is the Hodge energy ``<alpha, (1 + Laplacian) alpha>``.  ``Wminus1p``
    lifts through ``(Laplacian + 1) u = alpha`` and reports ``W1p(u)``,
    which at p = 2 is exactly the dual norm.  ``L2grad`` is the Dirichlet
    form ``(|d alpha|^2 + |d* alpha|^2)^(1/2)``.
    """
    _check_primal(alpha)
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    if kind not in NORM_KINDS:
        raise ValueError(f"unknown norm kind {kind!r}")
    if kind == "Lp":
        value = _lp_raw(alpha, p)
    elif kind == "W1p":
        value = _w1p_raw(alpha, p)
    elif kind == "Wminus1p":
        from .elliptic import shifted_solve

        value = _w1p_raw(shifted_solve(alpha), p)
    else:
        total = 0.0
        if alpha.degree < alpha.grid.n:
            total += _lp_raw(exterior_d(alpha), 2.0) ** 2
        if alpha.degree > 0:
            total += _lp_raw(codifferential(alpha), 2.0) ** 2
        value = float(np.sqrt(total))
        p = 2.0
    return NormReport(float(p), value, kind)


# ---------------------------------------------------------------------------
# mollification


def gaussian_weights(eps: float, h: float) -> np.ndarray:
    """Truncated discrete Gaussian (std ``eps``) on grid offsets, summing to 1."""
    if eps < 0:
        raise ValueError("mollifier width must be non-negative")
    if eps == 0:
        return np.ones(1)
    radius = max(1, ceil(4.0 * eps / h))
    j = np.arange(-radius, radius + 1)
    w = np.exp(-0.5 * (j * h / eps) ** 2)
    return w / w.sum()


def _convolve_axis(arr: np.ndarray, w: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    from scipy import ndimage

    if w.size == 1:
        return arr
    if periodic:
        size = arr.shape[axis]
        radius = (w.size - 1) // 2
        circ = np.zeros(size)
        np.add.at(circ, np.arange(-radius, radius + 1) % size, w)
        spec = np.fft.rfft(circ)
        shape = [1] * arr.ndim
        shape[axis] = spec.size
        fa = np.fft.rfft(arr, axis=axis)
        # correlation: conj of the kernel spectrum
        return np.fft.irfft(fa * np.conj(spec).reshape(shape), n=size, axis=axis)
    num = ndimage.correlate1d(arr, w, axis=axis, mode="constant", cval=0.0)
    ones_shape = [1] * arr.ndim
    ones_shape[axis] = arr.shape[axis]
    den = ndimage.correlate1d(np.ones(arr.shape[axis]), w, mode="constant", cval=0.0)
    return num / den.reshape(ones_shape)


def mollify(alpha: Cochain, eps: float) -> Cochain:
    """Componentwise normalized Gaussian smoothing of width ``eps``.

    Near the boundary of a box the kernel is renormalized over the cells
    that exist, so constants are reproduced exactly.
    """
    _check_primal(alpha)
    g = alpha.grid
    w = gaussian_weights(eps, g.h)
    if w.size == 1:
        return alpha
    out = np.empty_like(alpha.values)
    for b in g.blocks(alpha.degree):
        arr = alpha.block(b.axes)
        for axis in range(g.n):
            arr = _convolve_axis(arr, w, axis, g.periodic)
        out[b.slice] = arr.reshape((b.size,) + alpha.shape)
    return alpha.like(out)
