import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polyrepair.nn import Network

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_net(rng, n_layers=None, max_width=8, acts=("relu",), last="identity",
               n_in=None, n_out=None, scale=1.0) -> Network:
    n_layers = n_layers or int(rng.integers(1, 5))
    widths = [n_in or int(rng.integers(1, max_width + 1))]
    widths += [int(rng.integers(1, max_width + 1)) for _ in range(n_layers - 1)]
    widths.append(n_out or int(rng.integers(1, max_width + 1)))
    ws, bs, kinds = [], [], []
    for i in range(n_layers):
        ws.append(rng.normal(0, scale, size=(widths[i], widths[i + 1])))
        bs.append(rng.normal(0, scale, size=widths[i + 1]))
        kinds.append(last if (i == n_layers - 1 and last) else acts[int(rng.integers(len(acts)))])
    return Network.from_arrays(ws, bs, kinds)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
