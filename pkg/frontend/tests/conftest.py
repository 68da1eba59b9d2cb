import subprocess

import pytest

CFG = """
n_das = 4
n_eves = 2
seed = 3
gamma_d_db = 10
cov_mode = derived
"""


def _dasec(*args):
    subprocess.run(["dasec", *args], check=True, capture_output=True, text=True)


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """CSV corpus produced by the simulator CLI, its public interface."""
    root = tmp_path_factory.mktemp("corpus")
    cfg = root / "cell.cfg"
    cfg.write_text(CFG)
    out = root / "out"
    _dasec("run", "--config", str(cfg), "--out-dir", str(out), "--samples", "3000")
    _dasec("heatmap", "--config", str(cfg), "--out-dir", str(out), "--trials", "2")
    for var, values, name in (
        ("GammaD", "0,10", "gamma_d"),
        ("EdgeFraction", "0,1", "edge"),
        ("NumEves", "1,2", "eves"),
        ("SigmaE", "1e-7,1e-6", "sigma"),
    ):
        _dasec("sweep", "--config", str(cfg), "--out-dir", str(out / name),
               "--sweep-var", var, "--values", values, "--samples", "1000")
    return out
