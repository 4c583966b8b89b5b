import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from nhloc.model import HeterostructureSpec, RegionParams, heterostructure

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("ci")

S3 = np.sqrt(3.0)
HALDANE_TOPO = RegionParams(M=0.0, t=1.0, t_c=0.5, phi=np.pi / 2, mu=0.0)
SHELL = RegionParams(M=0.5 * S3, t=1.0, t_c=0.0, phi=0.0, mu=0.0)
LOSSY = RegionParams(M=0.5 * S3, t=1.0, t_c=0.0, phi=0.0, mu=0.2)
FIG1_SPEC = HeterostructureSpec(5.0, 7.5, 9.5, HALDANE_TOPO, SHELL, LOSSY)


def uniform_flake(params, radius):
    """Single-region flake: all three rings share `params`."""
    return heterostructure(HeterostructureSpec(radius - 0.2, radius - 0.1, radius, params, params, params))


@pytest.fixture(scope="session")
def fig1():
    return heterostructure(FIG1_SPEC)


@pytest.fixture(scope="session")
def hermitian_flake():
    return uniform_flake(HALDANE_TOPO, 10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in rep.nodeid and rep.when == "call":
                lines.append(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {rep.nodeid.split('::')[-1]}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
