import numpy as np
import pytest

from loopsoup.domain import Domain
from loopsoup.soup import Loop, LoopSoup, SoupConfig

ACCEPTANCE_LINES: list[str] = []


def record(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def square_loop(x0, y0, side, n_side=4):
    """Axis-aligned square traversed counter-clockwise, closed."""
    t = np.linspace(0, 1, n_side, endpoint=False)
    pts = np.concatenate(
        [
            np.column_stack([x0 + side * t, np.full_like(t, y0)]),
            np.column_stack([np.full_like(t, x0 + side), y0 + side * t]),
            np.column_stack([x0 + side - side * t, np.full_like(t, y0 + side)]),
            np.column_stack([np.full_like(t, x0), y0 + side - side * t]),
            [[x0, y0]],
        ]
    )
    return Loop((x0, y0), 1.0, pts)


def circle_loop(cx, cy, r, n=400):
    a = np.linspace(0, 2 * np.pi, n)
    pts = np.column_stack([cx + r * np.cos(a), cy + r * np.sin(a)])
    pts[-1] = pts[0]
    return Loop(tuple(pts[0]), 1.0, pts)


def soup_of(loops, domain=None):
    return LoopSoup(SoupConfig(domain or Domain.unit_square(), 1.0), tuple(loops))


@pytest.fixture
def small_config():
    return SoupConfig(Domain.unit_square(), 1.0, 0.02, 1.0, 1e-3, 11)
