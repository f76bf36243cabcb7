import numpy as np
import pytest

from rstree.pointprocess import PointSet

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def rec(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {title:<24} {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
    return rec


def hand_points(*xy, origin=True) -> PointSet:
    pts = [(0.0, 0.0)] + list(xy) if origin else list(xy)
    return PointSet(np.array(pts, dtype=float).reshape(-1, 2), has_origin=origin)
