import math
from fractions import Fraction

import pytest

from matchlearn import (
    GlobalState,
    Matching,
    NotErgodic,
    PolicyCombo,
    StateCapExceeded,
    content_profile,
    matching_mass,
    random_market,
    reachable_chain,
    stationary_distribution,
    symbolic_reachable_chain,
    validate_market,
)
from matchlearn.chain import ExactChain
from matchlearn.perturb import EpsPoly


def one_by_one():
    return validate_market(1, 1, [[Fraction(1, 2)]], [[Fraction(1, 2)]])


def test_eps_poly_algebra():
    mix = EpsPoly.baseline_mixture()
    assert mix.evaluate(Fraction(1, 10)) == Fraction(89, 100)
    product = mix * EpsPoly.power(1, Fraction(1, 2))
    assert product.evaluate(Fraction(1, 10)) == Fraction(89, 100) * Fraction(1, 20)
    assert product.resistance() == 1
    a = EpsPoly.power(2) + EpsPoly.power(2)
    assert a.evaluate(Fraction(1, 2)) == Fraction(1, 2)
    cancel = EpsPoly.power(1) + EpsPoly.power(1, -1)
    assert cancel.is_zero()
    assert EpsPoly.one_minus_power(Fraction(1, 2)).evaluate(Fraction(1, 4)) == 0.5


def test_rows_sum_to_exactly_one():
    chain = reachable_chain(one_by_one(), PolicyCombo.atl(Fraction(1, 10)))
    for row in chain.rows:
        assert sum((p for _, p in row), Fraction(0)) == 1
        assert all(isinstance(p, Fraction) for _, p in row)


def test_content_matched_self_loop_probability():
    """Hand enumeration: stay beside the partner via the baseline branch
    (1 - eps - eps^2) or by experimenting onto the only acceptor (eps/1)."""
    market = one_by_one()
    sym = symbolic_reachable_chain(market, PolicyCombo.atl(Fraction(1, 10)))
    target = GlobalState(*content_profile(market, Matching.from_list([0], 1)))
    idx = sym.states.index(target)
    assert sym.rows[idx][idx].evaluate(Fraction(1, 10)) == Fraction(99, 100)


def test_m2_chain_builds_under_cap(m2):
    chain = reachable_chain(m2, PolicyCombo.atl(Fraction(1, 10)))
    assert 0 < chain.num_states() < 200_000


def test_state_cap_enforced(m2):
    with pytest.raises(StateCapExceeded):
        symbolic_reachable_chain(m2, PolicyCombo.atl(Fraction(1, 10)), state_cap=5)


def test_joint_action_guard():
    market = random_market(5, 5, 0)
    with pytest.raises(StateCapExceeded):
        symbolic_reachable_chain(market, PolicyCombo.atl(Fraction(1, 10)))


def _manual_chain(rows, epsilon=0.1):
    states = [f"s{k}" for k in range(len(rows))]
    return ExactChain(None, None, epsilon, states, rows)


def test_stationary_two_state_symmetric():
    p = Fraction(3, 10)
    chain = _manual_chain(
        [[(0, 1 - p), (1, p)], [(0, p), (1, 1 - p)]], epsilon=Fraction(1, 10)
    )
    pi = stationary_distribution(chain)
    assert pi.probabilities == [Fraction(1, 2), Fraction(1, 2)]
    assert pi.exact
    assert pi.residual < 1e-12


def test_stationary_handles_transients():
    # state 0 leads into the closed pair {1, 2} and never returns
    chain = _manual_chain(
        [
            [(1, 0.5), (0, 0.5)],
            [(1, 0.5), (2, 0.5)],
            [(1, 0.5), (2, 0.5)],
        ]
    )
    pi = stationary_distribution(chain)
    assert pi.probabilities[0] == 0
    assert abs(pi.probabilities[1] - 0.5) < 1e-12
    assert pi.residual < 1e-12


def test_stationary_rejects_two_closed_classes():
    chain = _manual_chain([[(0, 1.0)], [(1, 1.0)]])
    with pytest.raises(NotErgodic):
        stationary_distribution(chain)


def test_one_by_one_concentration_increases():
    """Exact solves at three rates: the matched-content state gains mass as
    experimentation shrinks."""
    market = one_by_one()
    sym = symbolic_reachable_chain(market, PolicyCombo.atl(Fraction(1, 10)))
    target = GlobalState(*content_profile(market, Matching.from_list([0], 1)))
    idx = sym.states.index(target)
    masses = []
    for eps in (Fraction(1, 5), Fraction(1, 10), Fraction(1, 20)):
        chain = sym.instantiate(eps)
        pi = stationary_distribution(chain)
        assert pi.exact and pi.residual < 1e-12
        masses.append(pi.probabilities[idx])
    assert masses[0] <= masses[1] <= masses[2]
    assert masses[2] > Fraction(9, 10)


def test_matching_mass_degenerate_projection():
    market = one_by_one()
    state = GlobalState(*content_profile(market, Matching.from_list([0], 1)))
    chain = ExactChain(market, None, Fraction(1, 10), [state], [[(0, Fraction(1))]])
    pi = stationary_distribution(chain)
    masses = matching_mass(chain, pi, market)
    assert masses.per_matching == {Matching.from_list([0], 1): Fraction(1)}
    assert masses.stable_mass == 1
    assert masses.acceptor_optimal_mass == 1


def test_float_and_exact_stationary_agree():
    market = one_by_one()
    chain = reachable_chain(market, PolicyCombo.atl(Fraction(1, 10)))
    exact = stationary_distribution(chain, exact_cutoff=100)
    floaty = stationary_distribution(chain, exact_cutoff=0)
    assert exact.exact and not floaty.exact
    for a, b in zip(exact.probabilities, floaty.probabilities):
        assert abs(float(a) - float(b)) < 1e-12


def test_resistances_well_defined_and_regular(m2):
    """Every transition has a positive leading coefficient, and numeric
    log-probability ratios at small rates recover the exponent within 1%."""
    for combo in (PolicyCombo.atl(Fraction(1, 10)), PolicyCombo.atl_star(Fraction(1, 10))):
        sym = symbolic_reachable_chain(m2, combo)
        resistances = sym.resistances()
        assert all(r >= 0 for r in resistances.values())
        sampled = 0
        for (i, j), r in resistances.items():
            if r == 0 or sampled >= 40:
                continue
            poly = sym.rows[i][j]
            p1 = float(poly.evaluate(Fraction(1, 10000)))
            p2 = float(poly.evaluate(Fraction(1, 20000)))
            fitted = math.log(p1 / p2) / math.log(2)
            assert abs(fitted - float(r)) < 0.01 * max(1.0, float(r))
            sampled += 1
        assert sampled > 0


def test_atl_star_chain_has_fractional_resistances(m2):
    sym = symbolic_reachable_chain(m2, PolicyCombo.atl_star(Fraction(1, 10)))
    values = set(sym.resistances().values())
    assert any(r % 1 != 0 for r in values)
    atl_values = set(
        symbolic_reachable_chain(m2, PolicyCombo.atl(Fraction(1, 10))).resistances().values()
    )
    assert all(r % 1 == 0 for r in atl_values)


def test_chain_export_round_trips(m2):
    import json

    chain = reachable_chain(one_by_one(), PolicyCombo.atl(Fraction(1, 10)))
    data = json.loads(json.dumps(chain.to_json_dict()))
    assert len(data["states"]) == chain.num_states()
    assert all(len(t) == 3 for t in data["transitions"])
    total = sum(float(p) for i, _, p in data["transitions"] if i == 0)
    assert abs(total - 1) < 1e-12
