import json

import pytest

from orbitlab.config import parse_config
from orbitlab.runner import run

CASES = {
    "evl-curve": """
        experiment = evl-curve
        system = doubling
        zeta = 0.37
        n = 500
        m = 400
        y_grid = -1:1:5
        seed = 1
    """,
    "hts": """
        experiment = hts
        system = doubling
        zeta = 0.37
        delta = 0.005
        m = 400
        t_grid = 0:3:7
        seed = 2
    """,
    "rts": """
        experiment = rts
        system = doubling
        zeta = 0.37
        delta = 0.005
        m = 400
        t_grid = 0:3:7
        seed = 3
    """,
    "kac": """
        experiment = kac
        system = doubling
        zeta = 0.37
        delta = 0.005
        m = 200
        seed = 4
    """,
    "epp-poisson": """
        experiment = epp-poisson
        system = doubling
        zeta = 0.37
        n = 500
        m = 1200
        horizon = 3.0
        seed = 5
    """,
    "htpp-poisson": """
        experiment = htpp-poisson
        system = doubling
        zeta = 0.37
        delta = 0.002
        m = 1200
        horizon = 3.0
        seed = 6
    """,
    "duality-check": """
        experiment = duality-check
        system = doubling
        zeta = 0.41
        n = 1000
        m = 500
        seed = 7
    """,
    "dprime": """
        experiment = dprime
        system = doubling
        zeta = 0.0
        n = 1024
        budget = 200000
        k_values = 5,10
        seed = 8
    """,
    "d3": """
        experiment = d3
        system = doubling
        zeta = 0.0
        n = 256
        m = 5000
        t_shift = 1
        block_len = 32
        seed = 9
    """,
    "mixing": """
        experiment = mixing
        system = doubling
        zeta = 0.37
        delta = 0.1
        n = 4
        budget = 100000
        seed = 10
    """,
    "expansivity": """
        experiment = expansivity
        system = perturbed-expanding
        m = 100
        n = 500
        lam = 0.05
        seed = 11
    """,
}


@pytest.mark.parametrize("kind", sorted(CASES))
def test_pipeline_runs_and_persists(kind, tmp_path):
    cfg = parse_config(CASES[kind])
    report = run(cfg, out_dir=tmp_path)
    assert report.experiment == kind
    assert report.passed  # no failing declared tolerances at these sizes
    for name in report.files:
        assert (tmp_path / name).exists(), name
    payload = json.loads((tmp_path / "metrics.json").read_text())
    assert payload["experiment"] == kind
    assert payload["metrics"]
    assert parse_config(payload["config"]) == cfg


def test_duality_pipeline_reports_zero_mismatches(tmp_path):
    cfg = parse_config(CASES["duality-check"])
    report = run(cfg, out_dir=tmp_path)
    assert report.metrics["mismatches"] == 0
