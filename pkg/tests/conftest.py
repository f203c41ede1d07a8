import pytest

from dirtymac.rate_regions import ChannelParams

# example operating points for each scheme preset
PRESET_PARAMS = {
    "T1-Case1": ChannelParams(9.0, 4.0, 1.0, 0.5, 0.5),
    "T1-Case2": ChannelParams(4.0, 9.0, 1.0, 0.5, 0.5),
    "T1-Case3": ChannelParams(9.0, 4.0, 1.0, 0.5, 0.5),
    "T1-Case4": ChannelParams(4.0, 9.0, 1.0, 0.5, 0.5),
    "T2-Balanced": ChannelParams(10.0, 10.0, 1.0, 2.0, 2.0),
    "T3-Case1": ChannelParams(10.0, 5.0, 1.0, 1.0, 1.0),
    "T3-Case2": ChannelParams(10.0, 5.0, 1.0, 1.0, 1.0),
}


@pytest.fixture
def corner_params():
    return PRESET_PARAMS["T1-Case1"]


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; call with (number, ok, detail)."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(number, ok, detail):
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
        results[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
