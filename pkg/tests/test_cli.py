import json
import os

import numpy as np
import pytest

from prandtl.cli import main

BASE = {
    "grid": {"Nx": 32, "Ny": 96, "Ymax": 10.0},
    "params": {"m": 2, "k": 3.0, "ell": 0.4, "ell_prime": 0.7},
    "eps": 1e-3,
    "delta0": 1e-3,
    "T": 0.2,
    "solver": {"dt": 2e-3, "sample_every": 10},
}


def write_cfg(tmp_path, name="cfg.json", **overrides):
    cfg = json.loads(json.dumps(BASE))
    for k, v in overrides.items():
        if isinstance(v, dict) and k in cfg:
            cfg[k].update(v)
        else:
            cfg[k] = v
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_run_reference_exit0(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["stop_reason"] == "reached-T"
    assert {"C_m", "zeta", "c_tilde1", "c_tilde2"} <= set(manifest["measured"])
    assert (out / "energy.csv").exists()
    assert (out / "final.npz").exists()


def test_run_zero_perturbation(tmp_path):
    cfg = write_cfg(tmp_path, delta0=0.0)
    out = tmp_path / "zero"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "energy.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    for line in rows[1:]:
        vals = dict(zip(header, map(float, line.split(","))))
        assert vals["E_aniso"] == 0.0
        assert vals["E_g"] == 0.0
        assert vals["f_defect"] == 0.0


def test_missing_config_exit2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    assert "nope.json" in capsys.readouterr().err


def test_bad_config_key_exit2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"grid": {}, "bogus": 1}))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_bad_param_value_exit2(tmp_path):
    cfg = write_cfg(tmp_path, params={"m": 3})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_csv_determinism(tmp_path):
    cfg = write_cfg(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["run", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "energy.csv").read_bytes() == (out2 / "energy.csv").read_bytes()


def test_verify_unknown_suite_exit2():
    assert main(["verify", "foo"]) == 2


def test_verify_shear_suite(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "shear", "--out", str(out)])
    captured = capsys.readouterr().out
    assert code == 0
    verdict = json.loads(captured)
    assert verdict["passed"] is True
    assert (out / "verify_shear.json").exists()


def test_sweep_eps_needs_three(tmp_path):
    cfg = write_cfg(tmp_path, sweep_eps={"eps_list": [1e-2]})
    assert main(["sweep-eps", "--config", cfg, "--out", str(tmp_path / "s")]) == 2


def test_sweep_eps_runs(tmp_path):
    cfg = write_cfg(tmp_path, T=0.1,
                    sweep_eps={"eps_list": [1e-2, 1e-3, 1e-4]})
    out = tmp_path / "sweep"
    assert main(["sweep-eps", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["pairwise_distances"]) == 2
    assert manifest["cauchy_trend_decreasing"] is True


def test_stability_runs(tmp_path):
    cfg = write_cfg(tmp_path, T=0.1, stability={"gap": 1e-4})
    out = tmp_path / "stab"
    assert main(["stability", "--config", cfg, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["R_drift"] <= 0.25
    for entry in manifest["stability"]:
        assert not entry["partial"]


def test_lifespan_zero_delta_flagged(tmp_path):
    cfg = write_cfg(tmp_path, lifespan={"delta0_list": [1e-2, 0.0], "t_cap": 0.05})
    # 0.0 after 1e-2 is decreasing; the zero row must be capped and flagged
    out = tmp_path / "life"
    assert main(["lifespan", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "lifespan.csv").read_text().strip().splitlines()[1:]
    flags = {float(r.split(",")[0]): r.split(",")[2] for r in rows}
    assert flags[0.0] == "unbounded-at-resolution"


def test_strict_paper_mode_rejects_small_m(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"),
                 "--strict-paper-mode"]) == 2


def test_blowup_exit3(tmp_path, monkeypatch):
    from prandtl import cli
    from prandtl.errors import BlowupError

    def boom(*a, **k):
        raise BlowupError("synthetic NaN")

    monkeypatch.setattr(cli, "run", boom)
    cfg = write_cfg(tmp_path)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 3


def test_thread_cap_env(tmp_path, monkeypatch):
    from prandtl import cli

    monkeypatch.setenv("PRANDTL_THREADS", "2")
    assert cli._workers() == 2


def test_manifest_rerun_and_hash(tmp_path):
    cfg = write_cfg(tmp_path)
    out1 = tmp_path / "m1"
    assert main(["run", "--config", cfg, "--out", str(out1)]) == 0
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert len(manifest["config_sha256"]) == 64
    # re-running the manifest itself reproduces the CSV bit-exactly
    out2 = tmp_path / "m2"
    assert main(["run", "--config", str(out1 / "manifest.json"),
                 "--out", str(out2)]) == 0
    assert (out1 / "energy.csv").read_bytes() == (out2 / "energy.csv").read_bytes()


def test_verify_fail_exit1(monkeypatch, capsys):
    from prandtl import cli

    monkeypatch.setitem(cli.SUITES, "shear", lambda: (False, {"reason": "forced"}))
    assert main(["verify", "shear"]) == 1
    verdict = json.loads(capsys.readouterr().out)
    assert verdict["passed"] is False
