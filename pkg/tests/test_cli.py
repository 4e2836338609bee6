import json
import shutil
from pathlib import Path

import pytest

from gaugesmooth import io as gio
from gaugesmooth.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    manifest = out / "manifest.json"
    return code, (json.loads(manifest.read_text()) if manifest.exists() else None), out


def test_smooth_abelian_fixture(tmp_path, monkeypatch):
    monkeypatch.setenv("GAUGESMOOTH_CACHE", str(tmp_path / "cache"))
    code, man, out = run(["smooth", "--config", str(CONFIGS / "smooth_abelian.toml")], tmp_path)
    assert code == 0
    assert man["verdicts"]["max_curvature_residual"] <= 1e-8
    for entry in man["outputs"]:
        assert gio.file_hash(out / entry["path"]) == entry["hash"]


def test_constants_certificate(tmp_path):
    code, man, out = run(["constants", "--config", str(CONFIGS / "constants_box.toml")], tmp_path)
    assert code == 0 and man["verdicts"]["kappa0_le_kappa1"]
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["kappa0"] <= cert["kappa1"]


def test_cache_is_used(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("GAUGESMOOTH_CACHE", str(cache))
    run(["constants", "--config", str(CONFIGS / "constants_box.toml")], tmp_path, "a")
    files = list(cache.iterdir())
    assert len(files) == 1
    _, man_b, _ = run(["constants", "--config", str(CONFIGS / "constants_box.toml")], tmp_path, "b")
    _, man_a, _ = run(["constants", "--config", str(CONFIGS / "constants_box.toml")], tmp_path, "a")
    assert man_a == man_b


def test_p_equals_n_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('kind = "smooth"\n[grid]\nn = 2\n[exponents]\np = 2.0\n')
    code, man, _ = run(["smooth", "--config", str(cfg)], tmp_path)
    assert code == 2 and man is None
    assert "p > n" in capsys.readouterr().err


def test_missing_input_file_is_io_error(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('kind = "smooth"\n[grid]\nn = 2\ncounts = 8\n[exponents]\np = 4.0\n'
                   '[input]\nomega = "nope.cochain"\n')
    code, _, _ = run(["smooth", "--config", str(cfg)], tmp_path)
    assert code == 3


def test_grid_hash_mismatch_is_io_error(tmp_path):
    code, _, fx = run(["fixture", "--kind", "abelian-rough", "--seed", "0"], tmp_path, "fx")
    assert code == 0
    shutil.copy(fx / "omega.cochain", tmp_path / "omega.cochain")
    cfg = tmp_path / "c.toml"
    cfg.write_text('kind = "curvature"\n[grid]\nn = 2\ncounts = 12\n[exponents]\np = 4.0\n'
                   '[input]\nomega = "omega.cochain"\n')
    code, _, _ = run(["curvature", "--config", str(cfg)], tmp_path)
    assert code == 3


def test_file_inputs_are_hashed(tmp_path, monkeypatch):
    monkeypatch.setenv("GAUGESMOOTH_CACHE", str(tmp_path / "cache"))
    run(["fixture", "--kind", "abelian-rough", "--seed", "0"], tmp_path, "fx")
    for name in ("omega.cochain", "F.cochain"):
        shutil.copy(tmp_path / "fx" / name, tmp_path / name)
    cfg = tmp_path / "c.toml"
    cfg.write_text('kind = "decompose"\n[grid]\nn = 2\ncounts = 16\n[exponents]\np = 4.0\n'
                   '[input]\nomega = "omega.cochain"\nF = "F.cochain"\n')
    code, man, _ = run(["decompose", "--config", str(cfg)], tmp_path)
    assert code == 0 and man["verdicts"]["accepted"]
    assert [i["path"] for i in man["inputs"]] == ["F.cochain", "omega.cochain"]


def test_large_data_exits_zero_with_verdict(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text((CONFIGS / "smooth_su2.toml").read_text().replace(
        'fixture = "su2-small"', 'fixture = "su2-small"\nratio = 5.0'))
    code, man, _ = run(["smooth", "--config", str(cfg)], tmp_path)
    assert code == 0 and man["verdicts"]["smallness"] is False


@pytest.mark.parametrize("kind", ["su2-small", "abelian-rough", "sphere-patch", "sin-oscillation"])
def test_fixture_deterministic(kind, tmp_path):
    run(["fixture", "--kind", kind, "--seed", "7"], tmp_path, "a")
    run(["fixture", "--kind", kind, "--seed", "7"], tmp_path, "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_abelian_fixture_hits_target_norm(tmp_path):
    _, man, _ = run(["fixture", "--kind", "abelian-rough", "--seed", "0"], tmp_path)
    v = man["verdicts"]
    assert v["omega_Lp"] == pytest.approx(0.5 * v["kappa0"], rel=1e-2)


def test_immerse_writes_surface(tmp_path):
    code, man, out = run(["immerse", "--config", str(CONFIGS / "immerse_sphere.toml")], tmp_path)
    assert code == 0 and man["verdicts"]["aligned_error"] < 5e-3
    assert (out / "surface.ply").read_text().startswith("ply\n")
