import itertools

import numpy as np
import pytest

from probarc.csp import build_instance

LE = [(0, 0), (0, 1), (1, 1)]

ACCEPTANCE_LINES: list[str] = []


def brute_force_census(inst):
    """Independent oracle: scan the full assignment space."""
    usage = [np.zeros(m, dtype=np.int64) for m in inst.domain_sizes]
    total = 0
    for a in itertools.product(*(range(m) for m in inst.domain_sizes)):
        ok = all(inst.unary[x][v] for x, v in enumerate(a))
        if ok:
            for (x, y), mat in zip(inst.edges, inst.matrices):
                if not mat[a[x], a[y]]:
                    ok = False
                    break
        if ok:
            total += 1
            for x, v in enumerate(a):
                usage[x][v] += 1
    return total, usage


def brute_force_solutions(inst):
    sols = []
    for a in itertools.product(*(range(m) for m in inst.domain_sizes)):
        if inst.is_solution(a):
            sols.append(a)
    return sols


@pytest.fixture
def chain_le_3():
    return build_instance(3, 2, [(0, 1, LE), (1, 2, LE)])


def less_than(m):
    return [(i, j) for i in range(m) for j in range(m) if i < j]


@pytest.fixture
def lt_chain():
    """X < Y < Z over {0, 1, 2} (values 1..3 shifted down)."""
    return build_instance(3, 3, [(0, 1, less_than(3)), (1, 2, less_than(3))])


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
