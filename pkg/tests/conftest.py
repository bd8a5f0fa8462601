"""Shared fixtures and the acceptance-line reporter.

Acceptance tests register one line per criterion; the hook below replays
them in a dedicated section of the terminal summary so the pass/fail
status of every criterion is visible in one place even under capture.
"""

from __future__ import annotations

import numpy as np
import pytest

from doc_tuner import LoraAdapter, ToyNetwork

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one pass/fail line, then assert it passed."""

    def _record(number: int, name: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        suffix = f" ({detail})" if detail else ""
        line = f"criterion {number:2d} {name}: {status}{suffix}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return _record


def single_layer_net(w, b, a, activation: str = "identity") -> ToyNetwork:
    """One-adapter network from explicit matrices (lists accepted)."""
    w = np.asarray(w, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    adapter = LoraAdapter(w, b, a, rank_r=b.shape[1], module_index=0)
    return ToyNetwork(
        adapters=[adapter],
        activation=activation,
        input_dim=w.shape[1],
        hidden_dim=w.shape[1],
        class_count=w.shape[0],
    )
