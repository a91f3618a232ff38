from __future__ import annotations

import pytest

import acceptance_log

from lattice_embed.bae import BaeSystem
from lattice_embed.geometry import rectangle, right_angle
from lattice_embed.green import GreenTable
from lattice_embed.lattice_core import Wavenumber


@pytest.fixture(scope="session")
def k_weak():
    return Wavenumber(0.6 + 0.01j)


@pytest.fixture(scope="session")
def k_strong():
    return Wavenumber(0.6 + 0.1j)


@pytest.fixture(scope="session")
def table_weak(k_weak):
    return GreenTable(k_weak)


@pytest.fixture(scope="session")
def table_strong(k_strong):
    return GreenTable(k_strong)


@pytest.fixture(scope="session")
def square():
    return rectangle(21, 21, (-10, -10))


@pytest.fixture(scope="session")
def square_system(square, k_weak, table_weak):
    return BaeSystem(square, k_weak, table_weak)


@pytest.fixture(scope="session")
def elbow():
    return right_angle(21)


@pytest.fixture(scope="session")
def elbow_system(elbow, k_weak, table_weak):
    return BaeSystem(elbow, k_weak, table_weak)


def pytest_terminal_summary(terminalreporter):
    results = acceptance_log.RESULTS
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
