import json
from pathlib import Path

import pytest

from qcsmc.sweep import run_sweep, sweep_from_dict

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"

CRITERIA = {
    1: "gain threshold reproduction",
    2: "analytic-numeric agreement",
    3: "reach-time oracle",
    4: "U-exit bracket",
    5: "non-overshooting",
    6: "Lyapunov decrease",
    7: "control amplitude",
    8: "symmetry and determinism",
}

# criterion -> list of (test id, outcome, detail)
_results: dict[int, list[tuple[str, str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            status = "xfail" if rep.skipped else "xpass"
        else:
            status = rep.outcome
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _results.setdefault(marker.args[0], []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        rows = _results.get(n)
        if not rows:
            continue
        bad = [r for r in rows if r[1] != "passed"]
        verdict = "PASS" if not bad else "FAIL"
        note = ""
        if bad and all(r[1] == "xfail" for r in bad):
            note = " (known, documented shortfall: " + ", ".join(r[0] for r in bad) + ")"
        elif bad:
            note = " (" + ", ".join(f"{r[0]}={r[1]}" for r in bad) + ")"
        tr.write_line(f"criterion {n} [{title}]: {verdict}{note}")
        for name, status, detail in rows:
            if detail:
                tr.write_line(f"    {name}: {status}: {detail}")


def load_json(name: str) -> dict:
    return json.loads((SCENARIOS / name).read_text())


@pytest.fixture(scope="session")
def u_sweep():
    """The 1000-run U-region sweep shared by the bracket and overshoot criteria."""
    import time

    spec = sweep_from_dict(load_json("sweep_U_bracket.json"))
    t0 = time.perf_counter()
    result = run_sweep(spec, workers=1)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def u_sweep_high_gain():
    """Same sweep at gamma = 2929, which satisfies both gain conditions for D = 100."""
    raw = load_json("sweep_U_bracket.json")
    raw["base"] = {**raw["base"], "gamma": 2929}
    return run_sweep(sweep_from_dict(raw), workers=1)
