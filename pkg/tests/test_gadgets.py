import itertools

import networkx as nx
import pytest

from debtswap import (NetworkError, d_boolean, densest_k_reduction, one_fix, paper_fixture, solve,
                      worst_set_function, worst_sum_value)
from debtswap.gadgets import FIXTURES, PORTFOLIO_DEBTS


def densest(G, k):
    return max((G.subgraph(S).number_of_edges() for S in itertools.combinations(G.nodes, k)), default=0)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_boolean_threshold(d):
    g = d_boolean(d)
    net = g.attach("t")
    f = worst_set_function(net, "t", d)
    assert f.values == pytest.approx([d] * d + [0])
    assert g.params["d"] == d and g.weight == d


def test_boolean_worst_sum_variant():
    g = d_boolean(3, "worst_sum", D=10)
    assert g.network.n == 1 and g.network.funds_of(g.source) == 30 and g.weight == 3
    net = g.attach("t")
    assert worst_sum_value(net, "t", 27)[0] == pytest.approx(3)
    assert worst_sum_value(net, "t", 28.5)[0] == pytest.approx(1.5)
    with pytest.raises(NetworkError):
        d_boolean(3, "worst_sum", D=2)
    with pytest.raises(NetworkError):
        d_boolean(0)


def test_one_fix():
    net = one_fix(10).attach("t")
    assert worst_set_function(net, "t", 10).values == pytest.approx([1] * 11)
    assert worst_set_function(net, "t", 11).values[-1] == 0
    assert one_fix(0).network.n == 2
    g = one_fix(10, "worst_sum")
    assert g.network.funds_of(g.source) == 12 and g.weight == 1


def test_densest_examples():
    net, v = densest_k_reduction([("a", "b"), ("b", "c"), ("a", "c")])
    f = worst_set_function(net, v, 2)
    assert f.values[0] - f.values[2] == pytest.approx(1)
    net, v = densest_k_reduction([(1, 2), (2, 3)])
    assert solve(net).assets[v] == 2
    net, v = densest_k_reduction(list(itertools.combinations(range(4), 2)))
    f = worst_set_function(net, v, 3)
    assert f.values[0] - f.values[3] == pytest.approx(3)
    with pytest.raises(NetworkError):
        densest_k_reduction([])
    with pytest.raises(NetworkError):
        densest_k_reduction([(1, 1)])


def test_densest_worst_sum_variant():
    G = nx.petersen_graph().subgraph(range(6))
    net, v = densest_k_reduction(G.edges, model="worst_sum")
    D = max(dict(G.degree).values())
    m = G.number_of_edges()
    for k in range(0, 4):
        assert m - worst_sum_value(net, v, k * D)[0] == pytest.approx(densest(G, k))


def test_fixture_catalogue():
    assert set(FIXTURES) == {"fig1", "motive", "expansive", "semipos", "invariants", "badforw", "badforu",
                             "treepos", "portfolio76", "reorg3", "badforw_sum", "badforu_sum"}
    with pytest.raises(NetworkError):
        paper_fixture("nope")


def test_portfolio76_structure():
    net = paper_fixture("portfolio76").network
    assert net.funds_of("s1") == net.funds_of("s2") == 76
    debts = tuple((net.liability("s1", f"x{i}"), net.liability("s2", f"x{i}")) for i in range(1, 9))
    assert debts == PORTFOLIO_DEBTS == ((2, 17), (7, 12), (12, 7), (16, 3), (5, 14), (5, 14), (10, 9), (19, 0))


def test_reorg3_structure():
    net = paper_fixture("reorg3").network
    assert [net.funds_of(f"s{i}") for i in (1, 2, 3)] == [3, 3, 3]
    mids = [b for b in net.bank_ids if b.startswith("u")]
    assert len(mids) == 9 and all(net.total_liabilities[net.index[u]] == 1 for u in mids)


def test_fixture_app_d_modifications():
    assert paper_fixture("badforu_sum").network.funds_of("s1") == pytest.approx(2 + 2 / 3)
    base, mod = paper_fixture("badforw").network, paper_fixture("badforw_sum").network
    assert mod.liability("s1", "t") == 2 and base.liability("s1", "t") == 0


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_files_match_builders(name):
    from pathlib import Path

    from debtswap.network import load
    path = Path(__file__).resolve().parent.parent / "fixtures" / f"{name}.json"
    assert load(path).structurally_equal(paper_fixture(name).network)
