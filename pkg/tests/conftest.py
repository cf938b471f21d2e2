from __future__ import annotations

import pytest

from lvestimate.feeder import Bus, Feeder, Line, Load

# criterion id -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def two_bus_feeder(r_ohm: float = 0.02, x_ohm: float = 0.01, kw: float = 5.0, pf: float = 1.0,
                   profile: str = "res_0") -> Feeder:
    return Feeder(
        buses=(Bus(0, 0, 480, 0.0, 0.0, "source"), Bus(1, 1, 480, 100.0, 0.0, "load")),
        lines=(Line(0, 1, r_ohm, x_ohm),),
        loads=(Load(1, kw, pf, "residential", profile),),
    )


@pytest.fixture
def tiny_feeder() -> Feeder:
    return two_bus_feeder()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"criterion {cid:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
