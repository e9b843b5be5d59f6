import json
import math

import numpy as np
import pytest

from sqfilter.bogoliubov import BalancedCoeffs, balanced_from_hkkr
from sqfilter.gaussian import SqueezingParams
from sqfilter.quadrature import transfer_for
from sqfilter.system import SIGMA_MINUS, SIGMA_Z, SystemModel
from sqfilter.validation import (
    CheckResult,
    bogoliubov_sweep,
    build_report,
    default_transfer,
    generator_consistency,
    kallianpur_striebel_check,
    moment_oracle_residual,
    phase_curve_check,
    prop2_sweep,
    thermal_limit_check,
    transfer_sweep,
    vacuum_homodyne_filter,
    vacuum_limit_check,
    variance_factor_verdict,
)

from conftest import DEMO_M


@pytest.mark.parametrize("family", ["bv", "hkkr"])
def test_small_sweeps(family):
    rep = bogoliubov_sweep(100, seed=3, family=family)
    assert rep.max_residual <= 1e-10
    assert rep.draws == 100


def test_sweeps_report_keys():
    assert "bv_deficit" in bogoliubov_sweep(10, family="bv").residuals
    assert prop2_sweep(50).residuals["maximality"] <= 1e-6
    tr = transfer_sweep(50)
    assert tr.residuals["sum_alpha_gamma"] <= 1e-12
    # the printed (2n+1+Re m) factor does not reproduce the moments
    assert tr.residuals["moment_printed_factor"] > 1e-3


def test_variance_factor_verdict():
    c = variance_factor_verdict()
    assert c.passed
    assert json.loads(json.dumps(c.to_dict()))["verdict"] == "pass"


def test_moment_oracle_residual_small():
    assert moment_oracle_residual(balanced_from_hkkr(1.0, 0.5 + 0.2j)) <= 1e-12


@pytest.mark.parametrize("n", [0.0, 1.0, 5.0])
def test_thermal_limit(n):
    c = thermal_limit_check(n)
    assert c.passed


def test_vacuum_oracle_rejects_squeezed_bath():
    with pytest.raises(ValueError):
        vacuum_limit_check(SystemModel(np.zeros((2, 2)), SIGMA_MINUS, SqueezingParams(1, 0)))


def test_vacuum_oracle_free_evolution():
    # with L = 0 the oracle is exact unitary evolution
    H = 0.5 * SIGMA_Z
    rho0 = 0.5 * np.ones((2, 2), dtype=complex)
    out = vacuum_homodyne_filter(H, np.zeros((2, 2)), rho0, np.zeros(100), 1e-2)
    # sigma_z = diag(-1, 1) here, so rho_01 picks up exp(+i t)
    phase = np.exp(1j * 1.0)
    np.testing.assert_allclose(out[-1], [[0.5, 0.5 * phase], [0.5 * phase.conjugate(), 0.5]], atol=1e-12)


def test_vacuum_limit():
    mdl = SystemModel(0.5 * SIGMA_Z, SIGMA_MINUS, SqueezingParams(0, 0))
    c = vacuum_limit_check(mdl)
    assert c.deviation <= 1e-2
    assert c.passed and 0.8 <= c.order <= 1.3


def test_generator_consistency(demo_model):
    tc = default_transfer(demo_model.bath)
    c = generator_consistency(demo_model, tc)
    assert c.passed and c.residual <= 1e-10
    assert c.detail["sign_verdict"] == "minus_m"


def test_kallianpur_striebel(demo_model):
    tc = default_transfer(demo_model.bath)
    ks = kallianpur_striebel_check(demo_model, tc, T=0.5, n_paths=5)
    assert ks.normalized_deviation <= 1e-12
    assert ks.euler_deviation_half < ks.euler_deviation


def test_phase_curve_check():
    c = phase_curve_check()
    assert c.passed
    gaps = c.detail["max_gap_by_tau"]
    assert gaps["0.5"] <= 1e-12 and gaps["1"] > 0.1


def test_default_transfer_vacuum_fallback():
    tc = default_transfer(SqueezingParams(0, 0))
    assert tc.lam == 0.0 and tc.gamma == pytest.approx(1)
    with pytest.raises(ValueError):
        default_transfer(SqueezingParams(1, 0), representation="other")


def test_report_is_json_safe():
    checks = [CheckResult.upper("a", 1e-15, 1e-12), CheckResult.upper("b", math.inf, 1.0, arr=np.arange(3))]
    rep = build_report(checks, {"x": np.float64(math.nan)}, {"seed": 0})
    text = json.dumps(rep, allow_nan=False)
    back = json.loads(text)
    assert back["passed"] is False
    assert [c["verdict"] for c in back["checks"]] == ["pass", "fail"]
