import numpy as np
import pytest

from exterior_spectra.fields import RadialWell
from exterior_spectra.geometry import Disk, DomainSpec, build_mesh

WELL = RadialWell(8.0, 1.0, 2.0)


def well_spec(level=0, R=12.0, **kw):
    base = dict(grading=2.0, n_theta=16, n_r=16, interfaces=(2.0,))
    base.update(kw)
    return DomainSpec(Disk(1.0), R, level, **base)


@pytest.fixture(scope="session")
def coarse_mesh():
    return build_mesh(DomainSpec(Disk(1.0), 4.0, 0))


@pytest.fixture(scope="session")
def well_mesh0():
    return build_mesh(well_spec(0))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_acceptance(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
