"""Smooth approximation of a rough connection with its curvature held fixed.

For each width ``eps`` the exact part of the connection is mollified and the
coexact part is recomputed from the fixed-point problem

    Laplacian psi = F - A(psi) ^ A(psi),   A(psi) = d phi_eps + d* psi + eta,

so that ``A(psi)`` again has curvature ``F``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cochains import (
    Cochain,
    codifferential,
    curvature,
    exterior_d,
    mollify,
    norm,
    wedge,
)
from .constants import ConstantsCertificate, certify, closedness_margin
from .elliptic import DEFAULT_TOL, assemble, solve
from .grid import Grid, sub_box
from .hodge import HodgeSplit, decompose

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = (0.4, 0.2, 0.1, 0.05)
STALL_STEPS = 5
BLOWUP = 1e8


class SmallnessError(ValueError):
    """The data is too large for the contraction argument and no override was given."""


class FixedPointError(RuntimeError):
    def __init__(self, message: str, trace: "FixedPointTrace"):
        super().__init__(message)
        self.trace = trace


class NonContractionError(FixedPointError):
    """Successive differences stopped shrinking for several steps in a row."""


@dataclass
class SmoothingConfig:
    p: float
    q: float | None = None
    s: int = 0
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    fp_tol: float = 1e-8
    solver_tol: float = DEFAULT_TOL
    max_iter: int = 200
    kappa0: float | None = None
    kappa1: float | None = None
    K1: float | None = None
    mu: float | None = None
    warm_start: bool = False
    thin_schedule: bool = True
    override_smallness: bool = False

    def __post_init__(self):
        self.p = float(self.p)
        if self.q is None:
            self.q = self.p / 2
        self.schedule = tuple(float(e) for e in self.schedule)
        if self.q < self.p / 2:
            raise ValueError(f"need q >= p/2, got q={self.q}, p={self.p}")
        if int(self.s) != self.s or self.s < 0:
            raise ValueError("regularity index s must be a non-negative integer")
        if not self.schedule or any(e <= 0 for e in self.schedule):
            raise ValueError("eps schedule must be positive and non-empty")
        if any(b >= a for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("eps schedule must be strictly decreasing")

    def check_dimension(self, n: int) -> None:
        if not self.p > n:
            raise ValueError(
                f"exponent p={self.p} must exceed the dimension n={n} "
                "(the smoothing theorem assumes p > n)"
            )

    def with_certificate(self, cert: ConstantsCertificate) -> "SmoothingConfig":
        return replace(self, kappa0=cert.kappa0, kappa1=cert.kappa1, K1=cert.K1, mu=cert.mu)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = list(self.schedule)
        return d


@dataclass
class SmallnessReport:
    omega_norm: float
    F_norm: float
    kappa0: float
    total: float
    margin: float
    kappa0_prime: float | None
    closedness_margin: float | None
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _need_thresholds(cfg: SmoothingConfig) -> None:
    if cfg.kappa0 is None or cfg.K1 is None:
        raise ValueError("config has no thresholds; attach a constants certificate first")


def smallness_check(omega: Cochain, F: Cochain, cfg: SmoothingConfig) -> SmallnessReport:
    """Compare ``|omega|_{L^p} + |F|_{W^{-1,p}}`` with ``kappa0``."""
    _need_thresholds(cfg)
    om = norm(omega, cfg.p).value
    fn = norm(F, cfg.p, "Wminus1p").value
    total = om + fn
    margin = cfg.kappa0 - total
    kp, cm = None, None
    passed = margin >= 0
    if cfg.mu is not None:
        kp = 1.5 * cfg.K1 * (om + cfg.kappa0)
        cm = closedness_margin(cfg.mu, kp)
        passed = passed and cm > 0
    return SmallnessReport(om, fn, cfg.kappa0, total, margin, kp, cm, bool(passed))


@dataclass
class FixedPointTrace:
    diffs: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def rho(self) -> float:
        return max(self.ratios) if self.ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "diffs": list(self.diffs),
            "ratios": list(self.ratios),
            "iterations": self.iterations,
            "converged": self.converged,
            "rho": self.rho,
        }


def _connection(phi_eps: Cochain, zeta: Cochain, eta: Cochain | None) -> Cochain:
    conn = exterior_d(phi_eps) + codifferential(zeta)
    return conn + eta if eta is not None else conn


def fixed_point_solve(
    phi_eps: Cochain,
    F: Cochain,
    cfg: SmoothingConfig,
    eta: Cochain | None = None,
    zeta0: Cochain | None = None,
) -> tuple[Cochain, FixedPointTrace]:
    """Picard iteration for the coexact potential at one mollification width."""
    L = assemble(F.grid, 2)
    zeta = zeta0 if zeta0 is not None else F.like(np.zeros_like(F.values))
    trace = FixedPointTrace()
    affine = phi_eps.m == 1
    stalled = 0
    for it in range(1, cfg.max_iter + 1):
        conn = _connection(phi_eps, zeta, eta)
        nxt, _ = solve(L, F - wedge(conn, conn), cfg.solver_tol)
        diff = norm(nxt - zeta, cfg.p, "W1p").value
        if trace.diffs and trace.diffs[-1] > 0:
            ratio = diff / trace.diffs[-1]
            trace.ratios.append(ratio)
            stalled = stalled + 1 if ratio >= 1 else 0
        trace.diffs.append(diff)
        trace.iterations = it
        zeta = nxt
        if diff < cfg.fp_tol or (affine and zeta0 is None):
            # scalar 1-forms wedge to zero, so one application is the fixed point
            trace.converged = True
            return zeta, trace
        if stalled >= STALL_STEPS or not math.isfinite(diff) or diff > BLOWUP:
            raise NonContractionError(
                f"no contraction after {it} iterations (last ratio {trace.ratios[-1]:.3f})",
                trace,
            )
    raise FixedPointError(f"fixed point not reached in {cfg.max_iter} iterations", trace)


def spectral_indicator(alpha: Cochain) -> float:
    """Share of energy above half the Nyquist frequency (DCT on a box, FFT on a torus)."""
    from scipy.fft import dctn

    g = alpha.grid
    high = total = 0.0
    for b in g.blocks(alpha.degree):
        arr = alpha.block(b.axes)
        axes = tuple(range(g.n))
        if g.periodic:
            spec = np.fft.fftn(arr, axes=axes)
            freqs = [np.abs(np.fft.fftfreq(s)) * 2 for s in b.shape]  # 1 at Nyquist
        else:
            spec = dctn(arr, axes=axes, norm="ortho")
            freqs = [np.arange(s) / s for s in b.shape]
        mesh = np.meshgrid(*freqs, indexing="ij")
        top = np.max(np.stack(mesh), axis=0)
        energy = np.sum(np.abs(spec) ** 2, axis=tuple(range(g.n, arr.ndim)))
        total += float(energy.sum())
        high += float(energy[top > 0.5].sum())
    return high / total if total > 0 else 0.0


@dataclass
class EpsilonRecord:
    eps: float
    status: str
    iterations: int = 0
    rho: float = float("nan")
    dpsi_l2: float = float("nan")
    psi_w12: float = float("nan")
    curvature_residual: float = float("nan")
    curvature_bound: float = float("nan")
    omega_eps_norm: float = float("nan")
    distance: float = float("nan")
    phi_error: float = float("nan")
    phi_w1p_error: float = float("nan")
    spectral: float = float("nan")
    trace: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "converged"


CSV_FIELDS = (
    "eps", "status", "iterations", "rho", "dpsi_l2", "psi_w12", "curvature_residual",
    "curvature_bound", "omega_eps_norm", "distance", "phi_error", "phi_w1p_error", "spectral",
)


@dataclass
class SmoothingReport:
    config: dict
    smallness: SmallnessReport | None
    split_residual: float
    psi_spectral: float
    records: list[EpsilonRecord]
    grid_hash: str

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "smallness": self.smallness.to_dict() if self.smallness else None,
            "split_residual": self.split_residual,
            "psi_spectral": self.psi_spectral,
            "grid_hash": self.grid_hash,
            "records": [asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in self.records:
            writer.writerow([_fmt(getattr(r, name)) for name in CSV_FIELDS])
        return buf.getvalue()


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


def _thin(split: HodgeSplit, cfg: SmoothingConfig) -> dict[float, float]:
    """W^{1,p} mollification error of phi per width."""
    errors = {}
    for eps in cfg.schedule:
        errors[eps] = norm(mollify(split.phi, eps) - split.phi, cfg.p, "W1p").value
    return errors


def smooth_family(
    omega: Cochain,
    F: Cochain,
    cfg: SmoothingConfig,
    split: HodgeSplit | None = None,
) -> tuple[list[Cochain | None], SmoothingReport]:
    """Run the smoothing construction for every width in the schedule.

    Widths whose fixed point fails are recorded with their status and a
    ``None`` entry in the returned list; they do not stop the family.
    """
    cfg.check_dimension(omega.grid.n)
    small = None
    if cfg.kappa0 is not None and cfg.K1 is not None:
        small = smallness_check(omega, F, cfg)
        if not small.passed and not cfg.override_smallness:
            raise SmallnessError(
                f"|omega| + |F| = {small.total:.4g} exceeds kappa0 = {cfg.kappa0:.4g} "
                "or the closedness condition fails; pass override to explore anyway"
            )
    elif not cfg.override_smallness:
        raise SmallnessError("no thresholds in config; attach a certificate or override")

    if split is None:
        split = decompose(omega, F, cfg.solver_tol)
    nonabelian = omega.m > 1
    phi_errors = _thin(split, cfg)
    eta = split.eta if np.any(split.eta.values) else None
    psi_spec = spectral_indicator(split.psi)

    family: list[Cochain | None] = []
    records: list[EpsilonRecord] = []
    for eps in cfg.schedule:
        rec = EpsilonRecord(eps=eps, status="pending", phi_w1p_error=phi_errors[eps])
        if (
            cfg.thin_schedule and nonabelian and cfg.kappa0 is not None
            and phi_errors[eps] > cfg.kappa0
        ):
            rec.status = "thinned"
            records.append(rec)
            family.append(None)
            continue
        phi_eps = mollify(split.phi, eps)
        try:
            psi_eps, trace = fixed_point_solve(
                phi_eps, F, cfg, eta, split.psi if cfg.warm_start else None
            )
        except NonContractionError as exc:
            log.warning("eps=%g: %s", eps, exc)
            rec.status, rec.trace = "non-contraction", exc.trace.to_dict()
            rec.iterations, rec.rho = exc.trace.iterations, exc.trace.rho
            if small is not None and small.passed:
                log.warning("contraction failed although the smallness check passed; K1 may be low")
            records.append(rec)
            family.append(None)
            continue
        except FixedPointError as exc:
            rec.status, rec.trace = "max-iter", exc.trace.to_dict()
            rec.iterations, rec.rho = exc.trace.iterations, exc.trace.rho
            records.append(rec)
            family.append(None)
            continue
        omega_eps = _connection(phi_eps, psi_eps, eta)
        rec.status = "converged"
        rec.iterations, rec.rho, rec.trace = trace.iterations, trace.rho, trace.to_dict()
        rec.dpsi_l2 = norm(exterior_d(psi_eps), 2).value if omega.grid.n > 2 else 0.0
        rec.psi_w12 = norm(psi_eps, 2, "W1p").value
        rec.omega_eps_norm = norm(omega_eps, cfg.p).value
        rec.curvature_residual = norm(curvature(omega_eps) - F, cfg.p / 2).value
        rec.curvature_bound = 10 * (cfg.fp_tol + cfg.solver_tol) * (1 + rec.omega_eps_norm ** 2)
        rec.distance = norm(omega_eps - omega, cfg.p).value
        rec.phi_error = norm(exterior_d(phi_eps - split.phi), cfg.p).value
        rec.spectral = spectral_indicator(psi_eps)
        records.append(rec)
        family.append(omega_eps)

    report = SmoothingReport(cfg.to_dict(), small, split.residual, psi_spec, records,
                             omega.grid.hash)
    return family, report


@dataclass
class RestrictedProblem:
    grid: Grid
    omega: Cochain
    F: Cochain
    certificate: ConstantsCertificate
    smallness: SmallnessReport
    config: SmoothingConfig


def snap_box(grid: Grid, center, radius: float) -> tuple[np.ndarray, np.ndarray]:
    c = (np.asarray(center, float) - np.asarray(grid.origin)) / grid.h
    r = radius / grid.h
    lo = np.clip(np.rint(c - r), 0, grid.counts).astype(int)
    hi = np.clip(np.rint(c + r), 0, grid.counts).astype(int)
    return lo, hi


def subdomain_restrict(
    omega: Cochain,
    F: Cochain,
    center,
    radius: float,
    cfg: SmoothingConfig,
    probes: int = 32,
    seed: int = 0,
) -> RestrictedProblem:
    """Restrict the problem to an axis-aligned sub-box and recompute constants."""
    lo, hi = snap_box(omega.grid, center, radius)
    sub, maps = sub_box(omega.grid, lo, hi)
    om = omega.restrict(sub, maps[1])
    fs = F.restrict(sub, maps[2])
    cert = certify(sub, cfg.p, probes, seed, omega.algebra)
    sub_cfg = cfg.with_certificate(cert)
    return RestrictedProblem(sub, om, fs, cert, smallness_check(om, fs, sub_cfg), sub_cfg)
