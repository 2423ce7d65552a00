import json
import math

import numpy as np
import pytest

from finslerprod.verify import (
    CHECK_IDS,
    CHECKS,
    DEFAULT_TOLERANCES,
    Sampling,
    TheoremCheck,
    check_block_structure,
    check_einstein_dichotomy,
    check_hessian_blocks,
    check_inverse_blocks,
    check_ricci_additivity,
    check_ricci_flat_iff,
    check_spray_split,
    run_all,
    run_checks,
)

SMALL = Sampling(count=10, seed=3)


@pytest.fixture(scope="module")
def summary(demo):
    return run_all(demo)


def test_theorem_check_verdict():
    c = TheoremCheck("prop-2.1-hessian-blocks", 1e-8)
    assert c.verdict == "pass" and c.samples == 0
    c.record(5e-9)
    assert c.verdict == "pass"
    c.record(1e-8)
    assert c.verdict == "fail"
    c.record(float("nan"))
    assert c.worst_residual == math.inf
    assert c.samples == 3
    assert set(c.to_dict()) == {"check_id", "verdict", "samples", "worst_residual", "tolerance", "details"}


def test_every_check_id_runs(summary):
    assert [c.id for c in summary.checks] == sorted(CHECK_IDS)
    assert set(CHECKS) == set(CHECK_IDS) == set(DEFAULT_TOLERANCES)
    for c in summary.checks:
        assert c.samples > 0, c.id
        assert c.verdict == "pass", (c.id, c.worst_residual)
    assert summary.passed


def test_deterministic(demo, summary):
    again = run_all(demo)
    assert json.dumps(again.to_dict()) == json.dumps(summary.to_dict())


def test_seed_changes_samples(demo, summary):
    other = run_all(demo, seed=5)
    assert other.seed == 5 and other.passed
    a = summary.checks[0].details[0]["x"]
    b = other.checks[0].details[0]["x"]
    assert a != b


def test_individual_checks(demo):
    p = demo.metric("rr_ratio")
    for fn, cid in ((check_hessian_blocks, "prop-2.1-hessian-blocks"), (check_inverse_blocks, "prop-2.2-inverse-blocks"),
                    (check_spray_split, "thm-2.1-spray-split"), (check_block_structure, "prop-1.1-block-riemann"),
                    (check_ricci_additivity, "eq-3.5-ricci-additivity")):
        c = fn(p, SMALL)
        assert c.id == cid
        assert c.samples == 10
        assert c.verdict == "pass", (cid, c.worst_residual)


def test_tolerance_override_flips_verdict(demo):
    c = check_ricci_additivity(demo.metric("sphere_euc_ratio"), SMALL, {"eq-3.5-ricci-additivity": 1e-300})
    assert c.tolerance == 1e-300
    # additivity is not bit-exact, so an impossible tolerance fails honestly
    assert c.verdict == "fail"


def test_flat_iff_verdicts(demo):
    flat = check_ricci_flat_iff(demo.metric("flat_flat_ratio"), SMALL)
    d = flat.details[0]
    assert d["product_ricci_flat"] and d["factors_ricci_flat"] and d["statement"] == "consistent with"
    curved = check_ricci_flat_iff(demo.metric("sphere_euc_lin11"), SMALL)
    d = curved.details[0]
    assert not d["product_ricci_flat"] and not d["factors_ricci_flat"]
    assert curved.worst_residual == 0.0 and curved.samples == 10


def test_einstein_linear_sphere_pair(demo):
    c = check_einstein_dichotomy(demo.metric("sphere_sphere_lin11"), Sampling(einstein_points=2))
    assert c.verdict == "pass"
    for d in c.details:
        assert d["verdict"] == "einstein" and d["case"] == "einstein"
        assert d["lambda_hat_unnormalized"] == pytest.approx(1.0, abs=1e-5)
        assert d["left_lambda_unnormalized"] == pytest.approx(1.0, abs=1e-5)
        assert d["right_lambda_unnormalized"] == pytest.approx(1.0, abs=1e-5)
        assert d["max_abs_f_KH"] == 0.0


def test_einstein_ratio_sphere_pair_is_vacuous(demo):
    c = check_einstein_dichotomy(demo.metric("sphere_sphere_ratio"), Sampling(einstein_points=2))
    assert c.verdict == "pass"
    for d in c.details:
        assert d["verdict"] == "not-einstein"
        assert d["case"].startswith("vacuous")
        assert d["isotropy_spread"] > 1e-3
        assert d["max_abs_f_KH"] > 1e-3


def test_einstein_flat_product(demo):
    c = check_einstein_dichotomy(demo.metric("flat_flat_lin23"), Sampling(einstein_points=1))
    (d,) = c.details
    assert d["case"] == "ricci-flat" and d["residual"] == 0.0


def test_run_checks_subset(demo):
    s = run_checks([demo.metric("prod_sq")], SMALL)
    assert s.passed and s.seed == 3
    assert all(c.samples > 0 for c in s.checks)
