import re

_ACCEPTANCE = {}

_TITLES = {
    1: "kernel oracle equivalence (conv2d / depthwise / dense, 1e-5)",
    2: "BN-fold equivalence (folded vs moving-stats inference, 1e-4)",
    3: "quantizer contract (zero exactness, round trip, monotone, dominance)",
    4: "average-precision oracle (per-channel min/max, 1e-6)",
    5: "information-theory identities (qkl >= 0, qce = H + qkl, ln 256)",
    6: "mechanism reproduction (heterogeneity vs precision/QMSE/QKL)",
    7: "protocol reproduction (5x800 trials, report schema, plots, reruns)",
    8: "architecture fidelity (toynet shapes, GAP input, projection indices)",
}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if m:
        _ACCEPTANCE[int(m.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        outcome = _ACCEPTANCE[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} — {_TITLES.get(n, '')}")
