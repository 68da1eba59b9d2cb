import numpy as np
import pytest

from dasec.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    SweepSpec,
    SweepVar,
    main,
)
from dasec.precoder import Variant
from dasec.scenario import Layout


BASE_CFG = """
n_das = 4
n_eves = 2
seed = 3
gamma_d_db = 10
cov_mode = derived
"""


@pytest.fixture()
def cfg_file(tmp_path):
    p = tmp_path / "scenario.cfg"
    p.write_text(BASE_CFG)
    return p


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(SweepVar.GAMMA_D, [])
    with pytest.raises(ValueError):
        SweepSpec(SweepVar.GAMMA_D, [10.0, 0.0])
    with pytest.raises(ValueError):
        SweepSpec(SweepVar.GAMMA_D, [0.0, 10.0], n_trials=0)
    spec = SweepSpec(SweepVar.EDGE_FRACTION, [0.0, 0.5, 1.0], n_trials=2,
                     layouts=(Layout.DA_GRID, Layout.CA_CENTER))
    assert spec.variants == (Variant.IMPERFECT_PROB,)


def test_run_writes_all_files(cfg_file, tmp_path):
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg_file), "--out-dir", str(out), "--samples", "1500"])
    assert rc == EXIT_OK
    for name in ("solution.csv", "mc_report.csv", "trace.csv", "region_samples.csv"):
        text = (out / name).read_text()
        assert text.startswith("# config_hash=")
        assert "seed=3" in text.splitlines()[0]


def test_run_deterministic_bytes(cfg_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", str(cfg_file), "--out-dir", str(a), "--samples", "1200"]) == EXIT_OK
    assert main(["run", "--config", str(cfg_file), "--out-dir", str(b), "--samples", "1200"]) == EXIT_OK
    for name in ("solution.csv", "mc_report.csv", "trace.csv", "region_samples.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_override_changes_hash(cfg_file, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg_file), "--out-dir", str(out),
                 "--samples", "1000", "--seed", "4"]) == EXIT_OK
    assert "seed=4" in (out / "solution.csv").read_text().splitlines()[0]


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n_das = lots\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_solver_failure_exit_code(tmp_path):
    hard = tmp_path / "hard.cfg"
    hard.write_text(BASE_CFG + "gamma_d_db = 90\np_da_mw = 0.001\np_on_mw = 0.001\np_off_mw = 0.0001\n")
    rc = main(["run", "--config", str(hard), "--out-dir", str(tmp_path / "x")])
    assert rc == EXIT_SOLVER


def test_sweep_subcommand(cfg_file, tmp_path):
    out = tmp_path / "sw"
    rc = main(["sweep", "--config", str(cfg_file), "--out-dir", str(out),
               "--sweep-var", "GammaD", "--values", "0,10", "--trials", "2",
               "--samples", "1000"])
    assert rc == EXIT_OK
    lines = [l for l in (out / "sweep.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0].split(",")[:5] == ["variant", "layout", "sweep_var", "value", "trial"]
    assert len(lines) == 1 + 2 * 2
    summary = [l for l in (out / "sweep_summary.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(summary) == 1 + 2


def test_sweep_rejects_unsorted_values(cfg_file, tmp_path):
    rc = main(["sweep", "--config", str(cfg_file), "--out-dir", str(tmp_path / "s"),
               "--sweep-var", "GammaD", "--values", "10,0"])
    assert rc == EXIT_CONFIG


def test_heatmap_subcommand(cfg_file, tmp_path):
    out = tmp_path / "hm"
    rc = main(["heatmap", "--config", str(cfg_file), "--out-dir", str(out), "--trials", "3"])
    assert rc == EXIT_OK
    lines = [l for l in (out / "heatmap.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "antenna,x_m,y_m,activation_freq"
    assert len(lines) == 1 + 4
    freqs = [float(l.split(",")[3]) for l in lines[1:]]
    assert all(0.0 <= f <= 1.0 for f in freqs)


def test_validate_subcommand(cfg_file, capsys):
    rc = main(["validate", "--config", str(cfg_file), "--samples", "2000"])
    out = capsys.readouterr().out
    assert rc == EXIT_OK
    assert "PASS" in out and "FAIL" not in out


def test_bruteforce_subcommand(cfg_file, tmp_path, capsys):
    out = tmp_path / "bf"
    rc = main(["bruteforce", "--config", str(cfg_file), "--out-dir", str(out)])
    assert rc == EXIT_OK
    assert "best_t=" in capsys.readouterr().out
    lines = [l for l in (out / "bruteforce.csv").read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 1 + 2**4


def test_bruteforce_infeasible_exit(tmp_path, capsys):
    hard = tmp_path / "hard.cfg"
    hard.write_text(BASE_CFG + "gamma_d_db = 90\np_da_mw = 0.001\np_on_mw = 0.001\np_off_mw = 0.0001\n")
    rc = main(["bruteforce", "--config", str(hard), "--out-dir", str(tmp_path / "b")])
    assert rc == EXIT_VALIDATION
