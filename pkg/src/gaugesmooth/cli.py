"""Command-line front end: ``gaugesmooth <command> --config run.toml --out dir``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io as gio
from .cochains import curvature, norm
from .config import ConfigError, ExperimentConfig, load_config
from .constants import ConstantsCertificate, certify
from .elliptic import SolverError
from .fixtures import FIXTURE_KINDS, abelian_rough, sin_oscillation, su2_small
from .grid import Grid
from .hodge import GaugeHypothesisError, NotClosedError, decompose
from .smoothing import SmallnessError, SmoothingConfig, smooth_family

log = logging.getLogger("gaugesmooth")

CACHE_ENV = "GAUGESMOOTH_CACHE"
EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 2, 3, 4


class Run:
    """Collects inputs, outputs and verdicts for one experiment."""

    def __init__(self, out: Path, cfg: ExperimentConfig | None, base: Path):
        self.out = out
        self.cfg = cfg
        self.base = base
        self.inputs: list[dict] = []
        self.outputs: list[dict] = []
        self.verdicts: dict = {}

    def add_input(self, rel: str) -> Path:
        path = (self.base / rel).resolve()
        if not path.exists():
            raise FileNotFoundError(f"input file {rel} not found")
        self.inputs.append({"path": rel, "hash": gio.file_hash(path)})
        return path

    def write(self, name: str, data, kind: str) -> None:
        path = self.out / name
        gio.atomic_write(path, data)
        self.outputs.append({"path": name, "hash": gio.file_hash(path), "kind": kind})

    def write_cochain(self, name: str, alpha) -> None:
        self.write(name, gio.cochain_bytes(alpha), "cochain")

    def manifest(self) -> None:
        body = {
            "config_hash": self.cfg.hash if self.cfg else None,
            "inputs": sorted(self.inputs, key=lambda d: d["path"]),
            "outputs": sorted(self.outputs, key=lambda d: d["path"]),
            "verdicts": self.verdicts,
        }
        gio.atomic_write(self.out / "manifest.json", gio.dumps(body))


# ---------------------------------------------------------------------------
# shared pieces


def _certificate(grid: Grid, cfg: ExperimentConfig, algebra) -> ConstantsCertificate:
    probes = int(cfg.constants.get("probes", 32))
    cache_dir = os.environ.get(CACHE_ENV)
    key = f"{grid.hash}-p{cfg.p:g}-{algebra.flavor}{algebra.m}-n{probes}-s{cfg.seed}.json"
    if cache_dir:
        cached = Path(cache_dir) / key
        if cached.exists():
            return ConstantsCertificate.from_dict(json.loads(cached.read_text()))
    cert = certify(grid, cfg.p, probes, cfg.seed, algebra)
    if cache_dir:
        gio.atomic_write(Path(cache_dir) / key, gio.dumps(cert.to_dict()))
    return cert


def _smoothing_config(cfg: ExperimentConfig, cert: ConstantsCertificate | None,
                      override: bool) -> SmoothingConfig:
    sm = dict(cfg.smoothing)
    tol = cfg.tolerances
    kwargs = {
        "p": cfg.p,
        "q": cfg.exponents.get("q"),
        "s": int(cfg.exponents.get("s", 0)),
        "fp_tol": float(tol.get("fixed_point", 1e-8)),
        "solver_tol": float(tol.get("solver", 1e-10)),
        "max_iter": int(sm.get("max_iter", 200)),
        "warm_start": bool(sm.get("warm_start", False)),
        "thin_schedule": bool(sm.get("thin_schedule", True)),
        "override_smallness": override,
    }
    if "schedule" in sm:
        kwargs["schedule"] = tuple(sm["schedule"])
    scfg = SmoothingConfig(**kwargs)
    if "kappa0" in sm:
        scfg.kappa0, scfg.kappa1, scfg.K1 = sm["kappa0"], sm.get("kappa1"), sm.get("K1", 1.0)
        scfg.mu = sm.get("mu")
    elif cert is not None:
        scfg = scfg.with_certificate(cert)
        scfg.override_smallness = override
    return scfg


def _load_problem(run: Run, cfg: ExperimentConfig):
    """Connection and curvature from a fixture or from cochain files."""
    inp = cfg.input
    if "fixture" in inp:
        kind = inp["fixture"]
        grid = cfg.build_grid() if cfg.grid else None
        N = grid.counts[0] if grid else 16
        ratio = float(inp.get("ratio", 0.5))
        probes = int(cfg.constants.get("probes", 32))
        if kind == "su2-small":
            pr = su2_small(cfg.seed, N, cfg.p, ratio, probes=probes)
        elif kind == "abelian-rough":
            pr = abelian_rough(cfg.seed, N, cfg.p, ratio, probes=probes)
        else:
            raise ConfigError(f"{cfg.source}: field 'input.fixture': {kind!r} is not a connection fixture")
        return pr.omega, pr.F, pr.certificate
    if "omega" not in inp:
        raise ConfigError(f"{cfg.source}: table 'input': need 'fixture' or 'omega'")
    expected = cfg.build_grid() if cfg.grid else None
    omega = gio.read_cochain(run.add_input(inp["omega"]), expected)
    F = gio.read_cochain(run.add_input(inp["F"]), omega.grid) if "F" in inp else curvature(omega)
    return omega, F, None


# ---------------------------------------------------------------------------
# experiments


def run_smooth(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    omega, F, cert = _load_problem(run, cfg)
    if cert is None and "kappa0" not in cfg.smoothing:
        cert = _certificate(omega.grid, cfg, omega.algebra or cfg.lie_algebra())
    scfg = _smoothing_config(cfg, cert, override)
    try:
        family, report = smooth_family(omega, F, scfg)
    except SmallnessError as exc:
        run.verdicts.update(smallness=False, message=str(exc))
        return
    run.write("report.json", report.to_json() + "\n", "report")
    run.write("report.csv", report.to_csv(), "table")
    if cert is not None:
        run.write("certificate.json", gio.dumps(cert.to_dict()), "certificate")
    if cfg.smoothing.get("write_family", False):
        for i, member in enumerate(family):
            if member is not None:
                run.write_cochain(f"omega_eps_{i}.cochain", member)
    ok = [r for r in report.records if r.ok]
    dist = [r.distance for r in ok]
    run.verdicts.update(
        smallness=report.smallness.passed if report.smallness else None,
        all_converged=len(ok) == len(report.records),
        curvature_preserved=all(r.curvature_residual <= r.curvature_bound for r in ok),
        contraction=all(r.rho < 1 for r in ok),
        closed=all(r.dpsi_l2 <= 1e-7 * max(r.psi_w12, 1e-300) for r in ok),
        converging=all(b < a for a, b in zip(dist, dist[1:])),
        max_curvature_residual=max((r.curvature_residual for r in ok), default=None),
    )


def run_decompose(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    omega, F, _ = _load_problem(run, cfg)
    tol = float(cfg.tolerances.get("solver", 1e-10))
    try:
        split = decompose(omega, F, tol)
    except (GaugeHypothesisError, NotClosedError) as exc:
        run.verdicts.update(accepted=False, message=str(exc))
        return
    run.write_cochain("phi.cochain", split.phi)
    run.write_cochain("psi.cochain", split.psi)
    run.write_cochain("eta.cochain", split.eta)
    run.write("split.json", gio.dumps(split.to_dict()), "report")
    run.verdicts.update(accepted=True, reconstruction_ok=split.residual <= 10 * tol,
                        residual=split.residual)


def run_constants(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    grid = cfg.build_grid()
    cert = _certificate(grid, cfg, cfg.lie_algebra())
    run.write("certificate.json", gio.dumps(cert.to_dict()), "certificate")
    run.verdicts.update(
        kappa0_le_kappa1=cert.kappa0 <= cert.kappa1,
        claim_inequalities=cert.K1 * cert.kappa1 <= 1 / 3 + 1e-15
        and 2 * cert.K1 * cert.kappa0 <= cert.kappa1 / 3 + 1e-15,
    )


def run_curvature(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    omega, F, _ = _load_problem(run, cfg)
    curv = curvature(omega)
    run.write_cochain("curvature.cochain", curv)
    gap = norm(curv - F, cfg.p / 2).value
    summary = {
        "omega_Lp": norm(omega, cfg.p).value,
        "curvature_Lp2": norm(curv, cfg.p / 2).value,
        "gap_to_F": gap,
    }
    run.write("curvature.json", gio.dumps(summary), "report")
    run.verdicts.update(matches_F=gap <= 1e-8)


def run_immerse(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    from . import pfaff

    im = cfg.immersion
    if "file" in im:
        data = gio.read_immersion(run.add_input(im["file"]))
    else:
        shape = im.get("fixture", "sphere-patch")
        N = int(im.get("N", 64))
        R = float(im.get("R", 1.0))
        makers = {
            "sphere-patch": lambda: pfaff.sphere_patch(N, R, second_form_scale=float(im.get("scale", 1.0))),
            "cylinder": lambda: pfaff.cylinder_patch(N, R),
            "clifford": lambda: pfaff.clifford_patch(N, (R, R)),
            "flat": lambda: pfaff.flat_patch(N),
        }
        if shape not in makers:
            raise ConfigError(f"{cfg.source}: field 'immersion.fixture': unknown {shape!r}")
        data = makers[shape]()
    omega, res, frames, surface = pfaff.reconstruct(data, mode=im.get("mode", "tree"))
    report = {
        "residuals": res.to_dict(),
        "holonomy": frames.holonomy,
        "transport_mismatch": frames.mismatch,
        "orthogonality_defect": frames.orthogonality_defect(),
        **surface.to_dict(),
    }
    run.write("immersion.json", gio.dumps(report), "report")
    run.write("surface.ply", gio.ply_text(surface.positions), "surface")
    run.verdicts.update(
        frames_orthogonal=frames.orthogonality_defect() <= 1e-8,
        aligned_error=surface.aligned_error,
    )


def run_stability(run: Run, cfg: ExperimentConfig, override: bool) -> None:
    from . import stability

    st = cfg.stability
    fam = st.get("family", "oscillation")
    if fam == "oscillation":
        A, B = sin_oscillation()
        A = np.asarray(st.get("A", A), float)
        B = np.asarray(st.get("B", B), float)
        counts = tuple(st.get("counts", (256, 8)))
        freqs = tuple(st.get("frequencies", (4, 8, 16, 32)))
        _, report = stability.run_oscillation(A, B, counts, freqs, float(st.get("r", 4.0)))
        mass = report.extras.get("wedge_mass")
        run.verdicts.update(
            wedge_mass=mass,
            wedge_defect_persists=bool(report.defect[0] > 1e-2),
            proxy_floor=min(report.proxy) >= 0.1 * report.proxy[0],
        )
    else:
        omega, F, cert = _load_problem(run, cfg)
        if cert is None:
            cert = _certificate(omega.grid, cfg, omega.algebra or cfg.lie_algebra())
        scfg = _smoothing_config(cfg, cert, override)
        _, report = stability.run_gauge(
            omega, F, scfg, float(st.get("eps0", 0.2)), int(st.get("count", 10))
        )
        run.verdicts.update(
            weak_limit_matches=bool(report.defect.max() <= 5e-9),
            proxy_final=report.proxy[-1],
        )
    run.write("stability.json", report.to_json() + "\n", "report")
    run.write("pairings.csv", report.to_csv(), "table")


def run_fixture(run: Run, kind: str, seed: int, args) -> None:
    from . import pfaff

    if kind == "su2-small":
        pr = su2_small(seed)
    elif kind == "abelian-rough":
        pr = abelian_rough(seed)
    elif kind == "sphere-patch":
        data = pfaff.sphere_patch(args.N or 64, args.R)
        path = run.out / "sphere_patch.immersion"
        gio.write_immersion(path, data)
        run.outputs.append({"path": path.name, "hash": gio.file_hash(path), "kind": "immersion"})
        res = pfaff.compatibility_residuals(data)
        run.verdicts.update(residuals=res.to_dict())
        return
    elif kind == "sin-oscillation":
        A, B = sin_oscillation()
        run.write("oscillation.json", gio.dumps({"A": A, "B": B, "frequencies": [4, 8, 16, 32],
                                                 "counts": [256, 8]}), "spec")
        return
    else:
        raise ConfigError(f"unknown fixture kind {kind!r}; choose from {', '.join(FIXTURE_KINDS)}")
    run.write_cochain("omega.cochain", pr.omega)
    run.write_cochain("F.cochain", pr.F)
    run.write("certificate.json", gio.dumps(pr.certificate.to_dict()), "certificate")
    run.verdicts.update(omega_Lp=norm(pr.omega, pr.config.p).value, kappa0=pr.certificate.kappa0)


EXPERIMENTS = {
    "smooth": run_smooth,
    "decompose": run_decompose,
    "constants": run_constants,
    "curvature": run_curvature,
    "immerse": run_immerse,
    "stability": run_stability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaugesmooth", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--override-smallness", action="store_true")
    p = sub.add_parser("fixture")
    p.add_argument("--kind", required=True, choices=FIXTURE_KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--R", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        if args.command == "fixture":
            run = Run(out, None, Path.cwd())
            run_fixture(run, args.kind, args.seed, args)
        else:
            cfg = load_config(args.config, args.command, args.seed)
            run = Run(out, cfg, Path(args.config).resolve().parent)
            EXPERIMENTS[args.command](run, cfg, args.override_smallness)
        run.manifest()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, gio.GridMismatchError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


if __name__ == "__main__":
    sys.exit(main())
