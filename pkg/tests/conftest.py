import sys

import pytest
from hypothesis import HealthCheck, settings

from itinopt.catalog import GeneratorSpec, generate_catalog
from itinopt.domain import KINDS, Catalog, Preferences, Segment, TravelOption

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_catalog(*segments, attrs=None):
    """Catalog from per-segment lists of (cost, duration, emissions) triples."""
    attrs = attrs or {}
    segs = []
    for s, options in enumerate(segments):
        opts = tuple(
            TravelOption(f"s{s}o{j}", s, KINDS[s % 4], c, t, e, attrs.get((s, j), {}))
            for j, (c, t, e) in enumerate(options)
        )
        segs.append(Segment(s, f"{KINDS[s % 4]}-{s}", opts))
    return Catalog(tuple(segs))


@pytest.fixture
def catalog42():
    return generate_catalog(GeneratorSpec(seed=42))


@pytest.fixture
def loose_prefs():
    return Preferences(budget=1e6, max_time=1e6)


def pytest_terminal_summary(terminalreporter):
    results = getattr(sys.modules.get("test_acceptance"), "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
