import numpy as np
import pytest

from swarmdist.cnn_catalog import LayerSpec, NetworkSpec, build_network
from swarmdist.harness.config import default_swarm
from swarmdist.latency_model import SwarmSetup, UavSpec
from swarmdist.radio_grid import GridConfig


@pytest.fixture
def lenet():
    return build_network("LeNet")


@pytest.fixture
def lenet_setup(lenet):
    return SwarmSetup(lenet, default_swarm(lenet, 5), GridConfig())


@pytest.fixture
def tiny_net():
    layers = [
        LayerSpec("conv", 1, 2, 3, 4, name="c1"),
        LayerSpec("fc", 32, 4, name="f1"),
    ]
    return NetworkSpec("tiny", layers, 16, 4)


def roomy_swarm(net, n, speed=512e6):
    return tuple(UavSpec(speed, float(net.total_memory), float(net.total_compute)) for _ in range(n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
