from __future__ import annotations

import numpy as np
import pytest

from bracketflow import catalog
from bracketflow.bracket_space import Bracket, act

_ACCEPTANCE: list[tuple[str, str, bool, str]] = []


def record_criterion(code: str, title: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE.append((code, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for code, title, ok, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{code} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_lie_bracket(rng: np.random.Generator, name: str = "r_heis3") -> Bracket:
    """A Lie bracket from the GL-orbit of a catalog entry."""
    mu = catalog.get(name).bracket
    h = np.eye(mu.N) + 0.4 * rng.standard_normal((mu.N, mu.N))
    return act(h, mu)
