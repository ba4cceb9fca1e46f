import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debtswap import (FinancialNetwork, NonConvergenceError, paper_fixture, solve, solve_fictitious_default,
                      solve_picard, solve_with_default_costs)
from debtswap.network import open_variant
from debtswap.oracle import RandomNetworkParams, lp_clearing, oracle_assets, random_network

FIG1 = {"v1": 5, "v2": 4, "v3": 6, "v4": 2, "v5": 5}


@pytest.mark.parametrize("solver", [solve_picard, solve_fictitious_default])
def test_fig1_assets(solver):
    sol = solver(paper_fixture("fig1").network)
    for b, a in FIG1.items():
        assert sol.assets[b] == pytest.approx(a, abs=1e-7)
    assert sol.defaulting == {"v2", "v3", "v4"}
    assert sol.residual < 1e-8


def test_fig1_payments_respect_clearing_conditions():
    net = paper_fixture("fig1").network
    sol = solve(net)
    for (u, v), p in sol.payments.items():
        assert p <= net.liability(u, v) + 1e-12
        assert p == pytest.approx(sol.recovery[u] * net.liability(u, v))


def test_expansive_payments():
    sol = solve(paper_fixture("expansive").network)
    assert sol.payments[("u1", "u2")] == pytest.approx(0.6)
    for key in [("s", "u1"), ("u2", "u1"), ("u2", "t")]:
        assert sol.payments[key] == pytest.approx(0.3)


def test_default_costs_semipos():
    net = paper_fixture("semipos").network
    sol = solve_with_default_costs(net, 0.5)
    assert sol.assets["v1"] == pytest.approx(0.25)
    assert sol.assets["v2"] == pytest.approx(9 / 8)
    assert solve(net.with_beta(0.5)).assets["v1"] == pytest.approx(0.25)
    # beta = 1 is the plain model
    assert solve_with_default_costs(net, 1.0).assets == pytest.approx(solve(net).assets)


def test_greatest_fixed_point_on_pure_cycle():
    # a cycle with no funds supports full repayment in the greatest solution
    net = FinancialNetwork.build({"a": 0, "b": 0}, [("a", "b", 1), ("b", "a", 1)])
    for solver in (solve_picard, solve_fictitious_default):
        assert solver(net).assets == pytest.approx({"a": 1, "b": 1})


def test_nonconvergence_carries_last_iterate():
    net = paper_fixture("fig1").network
    with pytest.raises(NonConvergenceError) as err:
        solve_picard(net, max_iter=1)
    assert err.value.last.recovery["v1"] == 1.0


def test_invalid_tolerance():
    with pytest.raises(ValueError):
        solve_picard(paper_fixture("fig1").network, tol=0)


def test_empty_network():
    sol = solve(FinancialNetwork.build({}, []))
    assert sol.assets == {} and sol.residual == 0.0


@pytest.mark.parametrize("seed", range(25))
def test_solvers_agree_with_oracles(seed):
    net = random_network(RandomNetworkParams(seed=seed, n=7, edge_prob=0.4, integer=False))
    fda, pic = solve_fictitious_default(net), solve_picard(net, tol=1e-12)
    ref = oracle_assets(net)[0]
    lp = lp_clearing(net)
    for i, b in enumerate(net.bank_ids):
        assert fda.assets[b] == pytest.approx(ref[i], abs=1e-7)
        assert pic.assets[b] == pytest.approx(ref[i], abs=1e-7)
        assert lp[b] == pytest.approx(ref[i], abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(2, 8), st.floats(0.1, 0.9))
def test_fixed_point_property(seed, n, p):
    net = random_network(RandomNetworkParams(seed=seed, n=n, edge_prob=p, integer=False))
    sol = solve(net)
    for b in net.bank_ids:
        owed = float(net.total_liabilities[net.index[b]])
        a = sol.assets[b]
        if owed > 0:
            expected = 1.0 if a >= owed else a / owed
            assert sol.recovery[b] == pytest.approx(expected, abs=1e-9)
        assert sol.equity[b] == pytest.approx(max(a - owed, 0.0), abs=1e-9)


@pytest.mark.parametrize("seed", range(15))
def test_open_variant_reproduces_closed_payments(seed):
    net = random_network(RandomNetworkParams(seed=100 + seed, n=6, edge_prob=0.5))
    cs = sorted(net.contracts, key=lambda c: c.key)
    pairs = [(a, b) for i, a in enumerate(cs) for b in cs[i + 1:]
             if len({a.debtor, a.creditor, b.debtor, b.creditor}) == 4]
    if not pairs:
        pytest.skip("no contract pair with distinct endpoints")
    c1, c2 = pairs[0]
    sol = solve(net)
    opened, s1, s2, t1, t2 = open_variant(net, c1.key, c2.key)
    fed = opened.with_funds({s1: sol.payments[c1.key], s2: sol.payments[c2.key]})
    osol = solve(fed)
    assert osol.assets[t1] == pytest.approx(sol.payments[c1.key], abs=1e-7)
    assert osol.assets[t2] == pytest.approx(sol.payments[c2.key], abs=1e-7)
    for b in net.bank_ids:
        assert osol.assets[b] == pytest.approx(sol.assets[b], abs=1e-7)
