from fractions import Fraction

import pytest

from zeno_csign.dynamics import GateParams
from zeno_csign.errors import NotBracketedError
from zeno_csign.optimize import ENCODED_UNBALANCED, find_tau_opt
from zeno_csign.parity import encoded_gate_channel, ideal_encoded_gate
from zeno_csign.resources import (
    FidelityTargetError,
    crossover_gamma,
    loqc_attempts,
    loqc_resources,
    zeno_at_gamma,
    zeno_resources,
)


@pytest.mark.parametrize("pf, half_n, photons", [(0.75, 1, 9), (0.01, 17, 25), (0.0001, 33, 41)])
def test_loqc_examples(pf, half_n, photons):
    rep = loqc_resources(pf)
    assert rep.code_size_n == 2 * half_n
    assert rep.photons_per_success == photons
    assert rep.protocol == "loqc"


@pytest.mark.parametrize("pf", [0.9, 0.5, 0.2, 0.0999, 0.01, 0.00316, 1e-6])
def test_loqc_selection_rule_exact(pf):
    k = loqc_attempts(pf)
    q = Fraction(3, 4)
    assert q ** k <= Fraction(pf) < q ** (k - 1)


def test_loqc_domain():
    with pytest.raises(ValueError):
        loqc_resources(1.0)
    with pytest.raises(ValueError):
        loqc_resources(0.0)


def test_ideal_zeno_uses_four_photons():
    rep = zeno_resources(GateParams.csign(1.0, 1.0), False, 0.999, 0.01, result=ideal_encoded_gate())
    assert rep.photons_per_success == pytest.approx(4.0, abs=1e-12)
    assert rep.ratio_vs_loqc == pytest.approx(25 / 4, abs=1e-12)


def test_photons_times_success_is_four():
    params = GateParams.csign(700, 0.1)
    rep = zeno_resources(params, False, None)
    assert rep.photons_per_success * rep.success_prob == pytest.approx(4.0, rel=1e-15)
    assert rep.photons_per_success >= 4


def test_unmet_target_reports_achieved_fidelity():
    params = GateParams.csign(100, 0.3)
    achieved = encoded_gate_channel(params).process_fidelity
    with pytest.raises(FidelityTargetError) as err:
        zeno_resources(params, False, 0.999)
    assert err.value.achieved == pytest.approx(achieved)


def test_unbalanced_ratio_near_reference():
    rec = find_tau_opt(4000, ENCODED_UNBALANCED)
    rep = zeno_resources(GateParams.csign(4000, rec.tau_opt), False, None, 0.01)
    assert 4 <= rep.ratio_vs_loqc <= 10
    deep = zeno_resources(GateParams.csign(4000, rec.tau_opt), False, None, 0.0001)
    assert deep.ratio_vs_loqc > rep.ratio_vs_loqc > 1


def test_balanced_ratio_near_reference():
    rep = zeno_at_gamma(500, True, 0.999, 0.01)
    assert rep.fidelity >= 0.999
    assert 3 <= rep.ratio_vs_loqc <= 7


def test_crossover_monotone_in_failure_budget():
    kw = dict(target_fidelity=0.999, balanced=True, bounds=(20.0, 2000.0), rel_tol=5e-2)
    gs = [crossover_gamma(pf, **kw) for pf in (1e-4, 0.01, 0.3)]
    assert gs[0] <= gs[1] <= gs[2]
    # balanced gamma=500 already beats LOQC at P_f 0.01, so the crossover lies below it
    assert gs[1] < 500


def test_crossover_not_bracketed():
    with pytest.raises(NotBracketedError):
        crossover_gamma(0.01, 0.999, True, bounds=(1000.0, 2000.0))
