import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_configs import ALL, variant  # noqa: E402
from qtdp.core import DynamicProgram  # noqa: E402
from qtdp.models import build_model  # noqa: E402
from qtdp.q_transform import solve_fixed_point  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def tiny_dp(reward, kernel, beta=0.9, feasible=None, **kw):
    reward = np.asarray(reward, dtype=float)
    if feasible is None:
        feasible = np.ones(reward.shape, dtype=bool)
    return DynamicProgram(feasible, reward, np.asarray(kernel, dtype=float), beta, **kw)


@pytest.fixture(scope="session")
def built():
    return {name: build_model(cfg) for name, cfg in ALL.items()}


@pytest.fixture(scope="session")
def solved(built):
    return {name: solve_fixed_point(bm.dp) for name, bm in built.items()}


@pytest.fixture(scope="session")
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["ALL", "variant", "tiny_dp"]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        name, ok, detail = results[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{n:2d}] {name}: {detail}")
