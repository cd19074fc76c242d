"""Acceptance suite: every registered experiment at its default configuration.

Each experiment runs once per session; each criterion then asserts every
check tagged with it and prints a one-line verdict.  The full run takes
six to seven minutes, dominated by the non-abelian flow and the instanton
refinement.
"""
import pytest

from helicity_lab.experiments import REGISTRY, ExperimentConfig, run_experiment

CRITERIA = {
    1: "bw norm equals the mode-sum formula",
    2: "five helicity characterizations agree",
    3: "Maxwell evolution conserves the bw norm and omega",
    4: "abelian helicity iff (anti-)self-dual extension",
    5: "abelian flow decays at 2|k_min| onto P+A",
    6: "non-abelian solver reproduces embedded abelian data",
    7: "gradient identity against finite differences",
    8: "Hessian symmetry and boundary/integral agreement",
    9: "instanton fixture and residual convergence",
    10: "energy balance and horizontality along solutions",
    11: "h-field properties and the h+ flow",
    12: "small-field expansion remainder is cubic",
}


@pytest.fixture(scope="session")
def records(tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_experiment(ExperimentConfig(name, out=str(out)))
        return cache[name]

    return get


@pytest.mark.slow
@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(criterion, records, capsys):
    names = [name for name, e in REGISTRY.items() if criterion in e.criteria]
    assert names, f"no experiment covers criterion {criterion}"
    checks, errors = [], []
    for name in names:
        rec = records(name)
        if rec.error:
            errors.append(f"{name}: {rec.error}")
        checks += [(name, key, c) for key, c in rec.checks.items() if c["criterion"] == criterion]
    failed = [f"{n}/{k} ({c['detail']})" for n, k, c in checks if not c["passed"]]
    ok = bool(checks) and not failed and not errors
    with capsys.disabled():
        verdict = "PASS" if ok else "FAIL"
        print(f"\n[{verdict}] criterion {criterion:>2}: {CRITERIA[criterion]} "
              f"({len(checks)} check{'s' * (len(checks) != 1)} in {', '.join(names)})")
        for line in failed + errors:
            print(f"        {line}")
    assert checks, f"criterion {criterion} produced no checks"
    assert not errors, errors
    assert not failed, failed
