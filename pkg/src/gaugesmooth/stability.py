"""Weak limits of wedge products along oscillating and gauge-constrained families.

Weak convergence is tested against a fixed dictionary of twelve smooth
scalar densities.  For a 2-cochain ``X`` (values integrated over faces) and
density ``f`` the pairing is the matrix ``sum_c f(c) X_c``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .cochains import Cochain, curvature, exterior_d, from_blocks, norm, wedge
from .grid import Grid
from .smoothing import SmoothingConfig, SmoothingReport, smooth_family

KINDS = ("oscillation", "gauge")


@dataclass(frozen=True)
class SequenceSpec:
    kind: str
    frequencies: tuple[int, ...] = (4, 8, 16, 32)
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    r: float = 4.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not self.r > 2:
            raise ValueError(f"exponent r must exceed 2, got {self.r}")
        if len(self.frequencies) < 4:
            raise ValueError("need at least 4 family members to extrapolate")


def density_dictionary(grid: Grid) -> list[tuple[str, np.ndarray]]:
    """Twelve densities on faces: constant, 8 first Fourier modes, 2 doubled modes, a bump."""
    if grid.n != 2:
        raise ValueError("the test dictionary is defined for 2-D grids")
    centers = grid.cell_centers(2)
    lengths = np.asarray(grid.lengths)
    s = (centers - np.asarray(grid.origin)) / lengths  # unit-square coordinates
    x, y = 2 * np.pi * s[:, 0], 2 * np.pi * s[:, 1]
    out = [("const", np.ones(len(s)))]
    for name, arg in (("x", x), ("y", y), ("x+y", x + y), ("x-y", x - y)):
        out.append((f"cos({name})", np.cos(arg)))
        out.append((f"sin({name})", np.sin(arg)))
    out.append(("cos(2x)", np.cos(2 * x)))
    out.append(("cos(2y)", np.cos(2 * y)))
    r2 = np.sum(((s - 0.5) / 0.3) ** 2, axis=1)
    bump = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1 - r2, 1e-300)), 0.0)
    out.append(("bump", bump))
    return out


def pairings(two_form: Cochain, dictionary) -> np.ndarray:
    """Matrix pairings against every test density, shape (len(dictionary), r, c)."""
    return np.stack([np.einsum("c,cij->ij", f, two_form.values) for _, f in dictionary])


def oscillating_family(spec: SequenceSpec, grid: Grid) -> list[Cochain]:
    """``Omega_j = sin(2 pi j x1 / L1) (A dx1 + B dx2)`` sampled at edge midpoints."""
    if spec.kind != "oscillation":
        raise ValueError("use gauge_family for the gauge-constrained kind")
    if not grid.periodic or grid.n != 2:
        raise ValueError("the oscillation family lives on a 2-D torus")
    A = np.atleast_2d(np.asarray(spec.A, float))
    B = np.atleast_2d(np.asarray(spec.B, float))
    out = []
    for j in spec.frequencies:
        if j > grid.counts[0] // 8:
            raise ValueError(f"frequency {j} is not resolved by {grid.counts[0]} cells")
        blocks = {}
        for axes, mat in (((0,), A), ((1,), B)):
            X = grid.block_coords(1, axes)[0]
            s = np.sin(2 * np.pi * j * (X - grid.origin[0]) / grid.lengths[0])
            blocks[axes] = grid.h * s[..., None, None] * mat
        out.append(from_blocks(grid, 1, blocks, shape=A.shape))
    return out


def sine_norm(r: float) -> float:
    """``(int_0^1 |sin 2 pi x|^r dx)^(1/r)``."""
    from math import gamma, pi, sqrt

    return (gamma((r + 1) / 2) / (sqrt(pi) * gamma(r / 2 + 1))) ** (1.0 / r)


@dataclass
class GaugeFamily:
    members: list[Cochain]
    eps: list[float]
    base: Cochain
    report: SmoothingReport


def gauge_family(
    omega: Cochain, F: Cochain, cfg: SmoothingConfig, eps0: float, count: int
) -> GaugeFamily:
    """Smoothed connections ``Omega^{eps_j}``, ``eps_j = eps0 2^-j``; all share curvature ``F``."""
    schedule = tuple(eps0 * 2.0 ** -j for j in range(count))
    run_cfg = SmoothingConfig(**{**cfg.to_dict(), "schedule": schedule})
    fam, report = smooth_family(omega, F, run_cfg)
    members, eps = [], []
    for e, m in zip(schedule, fam):
        if m is not None:
            members.append(m)
            eps.append(e)
    return GaugeFamily(members, eps, omega, report)


def extrapolate(params: np.ndarray, values: np.ndarray, degree: int = 3) -> np.ndarray:
    """Polynomial extrapolation to ``param = 0`` (least squares when over-determined)."""
    params = np.asarray(params, float)
    flat = values.reshape(values.shape[0], -1)
    deg = min(degree, len(params) - 1)
    vander = np.vander(params, deg + 1)
    coef, *_ = np.linalg.lstsq(vander, flat, rcond=None)
    return coef[-1].reshape(values.shape[1:])


@dataclass
class WeakLimitReport:
    labels: list[str]
    params: list[float]
    pairings: np.ndarray  # (J, T, r, c)
    limit: np.ndarray  # (T, r, c)
    predicted: np.ndarray  # (T, r, c)
    gauge_defect: list[float]
    proxy: list[float]
    extras: dict = field(default_factory=dict)

    @property
    def defect(self) -> np.ndarray:
        """Per test density, Frobenius gap between extrapolated and predicted pairings."""
        diff = (self.limit - self.predicted).reshape(len(self.labels), -1)
        return np.sqrt(np.sum(diff ** 2, axis=1))

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "params": self.params,
            "limit": self.limit.tolist(),
            "predicted": self.predicted.tolist(),
            "defect": self.defect.tolist(),
            "gauge_defect": self.gauge_defect,
            "proxy": self.proxy,
            **self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["member", "param", "test_form", "row", "col", "pairing"])
        J, T, r, c = self.pairings.shape
        for j in range(J):
            for t in range(T):
                for a in range(r):
                    for b in range(c):
                        writer.writerow([j, repr(self.params[j]), self.labels[t], a, b,
                                         repr(float(self.pairings[j, t, a, b]))])
        return buf.getvalue()


def divcurl_report(family: list[Cochain], omega_bar: Cochain) -> list[float]:
    """``W^{-1,2}`` size of ``d Omega_j - d Omega_bar`` per member."""
    d_bar = exterior_d(omega_bar)
    return [norm(exterior_d(m) - d_bar, 2, "Wminus1p").value for m in family]


def weak_wedge_limit(
    family: list[Cochain],
    params,
    omega_bar: Cochain,
    F: Cochain | None = None,
    dictionary=None,
    window: int = 4,
) -> WeakLimitReport:
    """Pair ``Omega_j ^ Omega_j`` with the dictionary and extrapolate ``param -> 0``.

    The cubic extrapolation uses the ``window`` members with the smallest
    parameters (the tail of the family).
    """
    if len(family) < 4 or window < 4:
        raise ValueError("need at least 4 family members")
    grid = omega_bar.grid
    dictionary = dictionary or density_dictionary(grid)
    vals = np.stack([pairings(wedge(m, m), dictionary) for m in family])
    params = np.asarray(params, float)
    tail = np.argsort(params)[:window]
    limit = extrapolate(params[tail], vals[tail])
    predicted = pairings(wedge(omega_bar, omega_bar), dictionary)
    F = curvature(omega_bar) if F is None else F
    gauge = [norm(curvature(m) - F, 2, "Wminus1p").value for m in family]
    return WeakLimitReport(
        labels=[name for name, _ in dictionary],
        params=params.tolist(),
        pairings=vals,
        limit=limit,
        predicted=predicted,
        gauge_defect=gauge,
        proxy=divcurl_report(family, omega_bar),
    )


def wedge_mass(report: WeakLimitReport, commutator: np.ndarray, area: float) -> tuple[list[float], float]:
    """Constant-density pairings projected on a commutator, per unit area and commutator size.

    Returns per-member values and the extrapolated value.
    """
    k = np.asarray(commutator, float)
    scale = float(np.sum(k * k)) * area
    per = [float(np.sum(p[0] * k) / scale) for p in report.pairings]
    return per, float(np.sum(report.limit[0] * k) / scale)


def run_oscillation(
    A, B, counts=(256, 8), frequencies=(4, 8, 16, 32), r: float = 4.0
) -> tuple[list[Cochain], WeakLimitReport]:
    """Oscillation family on an anisotropic torus refined along the first axis."""
    grid = Grid(2, tuple(counts), 1.0 / counts[0], "torus")
    spec = SequenceSpec("oscillation", tuple(frequencies), np.asarray(A), np.asarray(B), r)
    fam = oscillating_family(spec, grid)
    A = np.atleast_2d(np.asarray(A, float))
    bar = Cochain(grid, 1, np.zeros((grid.num_cells(1),) + A.shape))
    params = [(j / counts[0]) ** 2 for j in frequencies]
    report = weak_wedge_limit(fam, params, bar)
    comm = A @ np.atleast_2d(B) - np.atleast_2d(B) @ A
    if np.any(comm):
        per, lim = wedge_mass(report, comm, grid.volume)
        report.extras.update(wedge_mass_members=per, wedge_mass=lim)
    report.extras["norms"] = [norm(m, r).value for m in fam]
    return fam, report


def run_gauge(omega: Cochain, F: Cochain, cfg: SmoothingConfig, eps0: float = 0.2,
              count: int = 10) -> tuple[GaugeFamily, WeakLimitReport]:
    """Gauge-constrained family from the smoothing engine, paired against its base."""
    fam = gauge_family(omega, F, cfg, eps0, count)
    report = weak_wedge_limit(fam.members, [e ** 2 for e in fam.eps], fam.base, F)
    report.extras["curvature_residuals"] = [
        r.curvature_residual for r in fam.report.records if r.ok
    ]
    return fam, report
