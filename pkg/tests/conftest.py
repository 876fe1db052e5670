import numpy as np
import pytest

from meshbot.mesh.shapes import synthetic_quadruped


@pytest.fixture(scope="session")
def quadruped():
    return synthetic_quadruped()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def partition(quadruped):
    from meshbot.segmentation import segment

    return segment(quadruped)


@pytest.fixture(scope="session")
def model(partition):
    from meshbot.model import assemble

    return assemble(partition, name="quad")


DESIGN_VARIANTS = {
    "quad": {},
    "wide": {"body_half": (0.09, 0.12, 0.035)},
    "slim": {"leg_radius": 0.014},
}


@pytest.fixture(scope="session")
def banks():
    from meshbot.model import assemble, generate_variant_bank
    from meshbot.segmentation import segment

    out = []
    for name, params in DESIGN_VARIANTS.items():
        m = assemble(segment(synthetic_quadruped(params)), name=name, source_id=name)
        out.append(generate_variant_bank(m, name))
    return out


@pytest.fixture(scope="session")
def repo(banks):
    from meshbot.evolution import DesignRepository

    r = DesignRepository()
    for b in banks:
        r.register_bank(b)
    return r


# --- acceptance summary ------------------------------------------------------------

_acceptance = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            item.user_properties.append(("acceptance", tuple(mark.args)))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("acceptance")
    if crit is None:
        return
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _acceptance[crit] = _acceptance.get(crit, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), ok in sorted(_acceptance.items()):
        terminalreporter.write_line(f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {title}")
