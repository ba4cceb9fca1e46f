import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from debtswap import (BudgetExceededError, FinancialNetwork, NetworkError, apply_shock, apply_swap,
                      paper_fixture, proportional_shock_function, solve, worst_set_function,
                      worst_set_value, worst_sum_function, worst_sum_value)
from debtswap.network import proportional_shock
from debtswap.oracle import (RandomNetworkParams, brute_worst_set, brute_worst_sum_grid, oracle_assets,
                             random_network)
from debtswap.shocks import refine_pwl, simplify


def pts(f):
    return [(round(x, 9), round(y, 9)) for x, y in f.breakpoints]


def assert_pwl(f, expected, tol=1e-7):
    got = f.breakpoints
    assert len(got) == len(expected), got
    for (x, y), (ex, ey) in zip(got, expected):
        assert x == pytest.approx(float(ex), abs=tol)
        assert y == pytest.approx(float(ey), abs=tol)


# -- proportional -------------------------------------------------------------

def test_motive_proportional():
    f = proportional_shock_function(paper_fixture("motive").network, "v1")
    assert f.exact and f.domain == "proportional"
    assert_pwl(f, [(0, 2), (0.5, 2), (1, 0)])
    assert f(1.0) == 0


def test_proportional_without_contracts():
    net = FinancialNetwork.build({"a": 3, "b": 1}, [])
    f = proportional_shock_function(net, "a")
    assert_pwl(f, [(0, 3), (1, 0)])


@pytest.mark.parametrize("seed", range(30))
def test_proportional_tracing_matches_pointwise(seed):
    net = random_network(RandomNetworkParams(seed=seed, n=7, edge_prob=0.4, integer=False))
    v = net.bank_ids[seed % net.n]
    f = proportional_shock_function(net, v)
    lams = np.random.default_rng(seed).uniform(0, 1, 64)
    E = np.array([net.funds * (1 - lam) for lam in lams])
    ref = oracle_assets(net, E)[:, net.index[v]]
    np.testing.assert_allclose(f(lams), ref, atol=1e-7)
    xs, ys = f.xs, f.ys
    assert xs[0] == 0 and xs[-1] == 1 and np.all(np.diff(xs) > 0)
    assert np.all(np.diff(ys) <= 1e-9)
    assert ys[0] == pytest.approx(solve(net).assets[v], abs=1e-9)


def test_proportional_default_cost_uses_refinement():
    net = paper_fixture("semipos").network.with_beta(0.5)
    f = proportional_shock_function(net, "v2")
    assert not f.exact
    for lam in np.linspace(0, 1, 11):
        direct = solve(apply_shock(net, proportional_shock(net, lam))).assets["v2"]
        assert f(lam) == pytest.approx(direct, abs=1e-7)


# -- worst-set ------------------------------------------------------------------

def test_motive_worst_set(swapped):
    fx, after = swapped("motive")
    assert worst_set_value(fx.network, "v1", 1) == (0.0, ("s1",))
    assert worst_set_value(after, "v1", 1)[0] == pytest.approx(1)
    val, wit = worst_set_value(fx.network, "v1", 0)
    assert val == 2 and wit == ()


def test_badforu_worst_set_witness():
    val, wit = worst_set_value(paper_fixture("badforu").network, "v2", 1)
    assert val == pytest.approx(2 / 3) and wit == ("s2",)


def test_badforw_w(swapped):
    fx, after = swapped("badforw")
    assert worst_set_function(fx.network, "w", 2).values == pytest.approx((4, 2, 0))
    assert worst_set_function(after, "w", 2).values == pytest.approx((4, 1, 0))


def test_treepos_v1_worst_set():
    f = worst_set_function(paper_fixture("treepos").network, "v1", 10)
    assert f.values == pytest.approx((18, 18, 18, 15, 14, 13, 12, 11, 10, 9, 8))
    # symmetry reduction is only a speed-up
    plain = worst_set_function(paper_fixture("treepos").network, "v1", 10, use_symmetry=False)
    assert plain.values == f.values and plain.witnesses == f.witnesses


def test_worst_set_tie_break_is_lexicographic():
    net = FinancialNetwork.build({"b": 1, "a": 1, "v": 0}, [("a", "v", 1), ("b", "v", 1)])
    assert worst_set_value(net, "v", 1) == (1.0, ("a",))


def test_worst_set_full_shock_keeps_cycle_payments():
    # with every bank hit the cycle still clears in the greatest solution
    net = FinancialNetwork.build({"a": 1, "b": 1, "v": 0}, [("a", "b", 1), ("b", "a", 1), ("b", "v", 1)])
    val, _ = worst_set_value(net, "v", 3)
    direct = solve(net.with_funds({"a": 0, "b": 0})).assets["v"]
    assert val == pytest.approx(direct)


def test_worst_set_errors():
    net = paper_fixture("treepos").network
    with pytest.raises(BudgetExceededError):
        worst_set_value(net, "v2", 10, budget=5)
    with pytest.raises(NetworkError):
        worst_set_value(net, "v1", -1)
    with pytest.raises(NetworkError):
        worst_set_function(net, "v1", net.n + 1)


@pytest.mark.parametrize("seed", range(50))
def test_worst_set_matches_brute_force(seed):
    n = 4 + seed % 5
    net = random_network(RandomNetworkParams(seed=seed, n=n, edge_prob=0.4))
    v = net.bank_ids[(3 * seed) % n]
    f = worst_set_function(net, v, n)
    for k in range(n + 1):
        assert f.values[k] == pytest.approx(brute_worst_set(net, v, k), abs=1e-9)
    assert np.all(np.diff(f.values) <= 1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_worst_set_relabeling_invariance(seed):
    net = random_network(RandomNetworkParams(seed=seed, n=7, edge_prob=0.4))
    perm = np.random.default_rng(seed).permutation(net.n)
    rename = {b: f"z{perm[i]}" for i, b in enumerate(net.bank_ids)}
    other = FinancialNetwork.build({rename[b.id]: b.funds for b in reversed(net.banks)},
                                   [(rename[c.debtor], rename[c.creditor], c.weight) for c in net.contracts])
    v = net.bank_ids[0]
    a = worst_set_function(net, v, net.n).values
    b = worst_set_function(other, rename[v], net.n).values
    assert a == pytest.approx(b, abs=1e-12)


# -- worst-sum ---------------------------------------------------------------------

def test_motive_worst_sum(swapped):
    fx, after = swapped("motive")
    assert worst_sum_value(fx.network, "v1", 2)[0] == pytest.approx(2)
    assert worst_sum_value(fx.network, "v1", 4)[0] == pytest.approx(0)
    assert worst_sum_value(after, "v1", 6)[0] == pytest.approx(1)
    val, shock = worst_sum_value(fx.network, "v1", 0)
    assert val == 2 and shock.total() == 0


def test_worst_sum_witness_is_feasible():
    net = paper_fixture("badforu_sum").network
    after = apply_swap(net, paper_fixture("badforu_sum").operation)
    val, shock = worst_sum_value(after, "v1", 2.5)
    assert shock.total() == pytest.approx(2.5)
    assert solve(apply_shock(after, shock)).assets["v1"] == pytest.approx(val)


def test_worst_sum_range_checked():
    net = paper_fixture("motive").network
    with pytest.raises(NetworkError):
        worst_sum_value(net, "v1", 9)
    with pytest.raises(NetworkError):
        worst_sum_value(net, "v1", -1)


def test_single_bank_worst_sum():
    f = worst_sum_function(FinancialNetwork.build({"v": 5}, []), "v")
    assert_pwl(f, [(0, 5), (5, 0)])
    assert f.exact


def test_badforw_sum_w_after(swapped):
    _, after = swapped("badforw_sum")
    f = worst_sum_function(after, "w")
    assert_pwl(f, [(0, 4), (4, 4), (8, 1), (12, 1), (16, 0)])


def test_badforu_sum_v2_before():
    f = worst_sum_function(paper_fixture("badforu_sum").network, "v2")
    t = 2 / 3
    assert_pwl(f, [(0, 2), (t, 2), (2, t), (2 + t, t), (4 + t, 0)])


def test_worst_sum_function_matches_values():
    net = paper_fixture("badforu_sum").network
    f = worst_sum_function(net, "u2")
    for rho in np.linspace(0, net.funds.sum(), 23):
        assert f(rho) == pytest.approx(worst_sum_value(net, "u2", rho)[0], abs=1e-7)


@pytest.mark.parametrize("seed", range(50))
def test_nosplit_bounded_by_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    net = random_network(RandomNetworkParams(seed=seed, n=4, edge_prob=0.5, zero_funds_prob=0.2))
    total = float(net.funds.sum())
    if total == 0:
        pytest.skip("no funds to shock")
    v = net.bank_ids[int(rng.integers(net.n))]
    rho = float(rng.uniform(0, total))
    exact, _ = worst_sum_value(net, v, rho)
    grid = brute_worst_sum_grid(net, v, rho, rho / 20)
    assert exact <= grid + 1e-7


# -- helpers ----------------------------------------------------------------------------

def test_refine_recovers_kinks():
    f = lambda x: min(3.0, 5.0 - x, 2.0 * (4.5 - x))  # noqa: E731
    points, exact = refine_pwl(f, [0.0, 6.0])
    assert not exact
    g = simplify(points)
    assert [round(x, 6) for x, _ in g] == [0.0, 2.0, 4.0, 6.0]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 10), st.floats(-5, 5)), min_size=2, max_size=8, unique_by=lambda p: p[0]))
def test_simplify_preserves_function(raw):
    raw = sorted(raw)
    xs = np.array([p[0] for p in raw])
    if np.any(np.diff(xs) < 1e-6):
        return
    out = simplify(raw)
    probe = np.linspace(xs[0], xs[-1], 50)
    np.testing.assert_allclose(np.interp(probe, [p[0] for p in out], [p[1] for p in out]),
                               np.interp(probe, xs, [p[1] for p in raw]), atol=1e-7)
