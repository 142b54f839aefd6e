"""One test per acceptance criterion; each prints a PASS/FAIL line with its measurements.

Tolerances and runtime limits are pinned here so that a change in the
validation module cannot loosen them silently.
"""
import pytest

from risdist.validation import CRITERIA, DEFAULT_SEED

RUNTIME_LIMIT_S = {"1": 10, "2": 180, "3": 180, "4": 60, "5": 60, "6": 60, "7": 60,
                   "8": 60, "9": 120, "10": 10}

# check-name fragment -> tolerance it must carry
PINNED = {
    "1": {"fit k=m=omega=1": 1e-9, "KS distance": 0.005},
    "2": {"max |model - MC|": 0.01, "NCCS error exceeds": 0.0},
    "3": {"max |model - MC|": 0.01, "NCCS error exceeds": 0.0},
    "4": {"T BER closed": 1e-6, "T capacity closed": 1e-6, "DH BER closed": 1e-4,
          "DH capacity closed": 1e-4},
    "5": {"T outage slope": 0.05, "DH outage slope": None},
    "6": {"T outage asymptote": 0.02, "T BER asymptote": 0.02,
          "DH capacity asymptote": 0.05, "T capacity asymptote": 0.05},
    "7": {"Jensen bound dominates": 0.0, "bound gap": 1.0},
    "8": {"DH BER slope < T BER slope": None},
    "9": {"identical CSVs": 0.0},
    "10": {},
}
EXPECTED_CHECKS = {
    "2": 4, "3": 5, "4": 4, "5": 5, "6": 4, "7": 2, "8": 1, "9": 2,
}


def _line(res):
    status = "PASS" if res.passed else "FAIL"
    parts = [f"criterion {res.cid} [{status}] {res.title} ({res.runtime_s:.1f} s)"]
    for c in res.checks:
        mark = "ok" if c.passed else "FAILED"
        parts.append(f"{c.name}: {c.measured:.4g} vs {c.tolerance} {mark}")
    return "; ".join(parts)


@pytest.mark.parametrize("cid", list(CRITERIA))
def test_acceptance_criterion(cid, capsys):
    fn = CRITERIA[cid]
    kwargs = {"seed": DEFAULT_SEED} if "seed" in fn.__code__.co_varnames else {}
    res = fn(**kwargs)
    with capsys.disabled():
        print("\n" + _line(res))
    assert res.runtime_limit_s == RUNTIME_LIMIT_S[cid]
    if cid in EXPECTED_CHECKS:
        assert len(res.checks) == EXPECTED_CHECKS[cid]
    for c in res.checks:
        for frag, tol in PINNED[cid].items():
            if frag in c.name:
                assert c.tolerance == tol, c.name
    if not res.passed:
        pytest.fail(_line(res), pytrace=False)
