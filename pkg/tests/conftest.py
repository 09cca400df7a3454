import io
import sys
from pathlib import Path

import numpy as np
import pytest
import scipy.io

sys.path.insert(0, str(Path(__file__).parent))

from iclabel_engine.network import ARCHITECTURE  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
ASSETS = Path(__file__).parent / "assets"


def random_weights_dict(seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    out = {}
    for s in ARCHITECTURE:
        fan_in = s.in_channels * s.kernel[0] * s.kernel[1]
        out[f"{s.name}_weight"] = (
            rng.standard_normal(s.weight_shape) * scale * np.sqrt(2.0 / fan_in)
        ).astype(np.float32)
        out[f"{s.name}_bias"] = (rng.standard_normal(s.out_channels) * 0.1).astype(np.float32)
    return out


def mat_bytes(variables, compress=False):
    buf = io.BytesIO()
    scipy.io.savemat(buf, variables, do_compression=compress)
    return buf.getvalue()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def weights_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("weights") / "weights.mat"
    path.write_bytes(mat_bytes(random_weights_dict()))
    return path


@pytest.fixture(scope="session")
def weights(weights_path):
    from iclabel_engine.matreader import load_mat
    from iclabel_engine.network import load_weights

    return load_weights(load_mat(weights_path))


@pytest.fixture(scope="session")
def epoched():
    from iclabel_engine.dataset import load_set

    return load_set(FIXTURES / "synthetic_epoched.set")


@pytest.fixture(scope="session")
def continuous():
    from iclabel_engine.dataset import load_set

    return load_set(FIXTURES / "synthetic_continuous.set")


# ---- acceptance summary -------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(number, title, status, detail=""):
        ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
