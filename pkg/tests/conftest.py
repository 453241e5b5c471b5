import functools

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def sts(n: int, seed: int):
    from steiner_forge.completion import generate_sts

    return generate_sts(n, seed)


@pytest.fixture(scope="session")
def sts9():
    from steiner_forge.design import affine_plane_3

    return affine_plane_3()


@pytest.fixture(scope="session")
def sts99():
    return sts(99, 0)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(k: int, ok: bool, title: str, detail: str, seconds: float) -> None:
    ACCEPTANCE_LINES[k] = f"[{'PASS' if ok else 'FAIL'}] {k:2d}. {title}: {detail} ({seconds:.1f} s)"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
