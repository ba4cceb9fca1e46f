import json

import numpy as np
import pytest

from debtswap.network import (Bank, Contract, FinancialNetwork, NetworkError, ShockVector, apply_shock,
                              dumps, from_dict, load, loads, merge_parallel, open_variant,
                              parse_number, proportional_shock, save, validate)


def small():
    return FinancialNetwork.build({"a": 2, "b": 0, "c": 1}, [("a", "b", 1), ("b", "c", 2)])


def test_parse_number_accepts_rationals():
    assert parse_number("2/3") == pytest.approx(2 / 3)
    assert parse_number(" 1/2 ") == 0.5
    assert parse_number(3) == 3.0
    with pytest.raises(NetworkError):
        parse_number("abc")
    with pytest.raises(NetworkError):
        parse_number(True)


def test_derived_arrays():
    net = small()
    assert net.bank_ids == ("a", "b", "c")
    np.testing.assert_array_equal(net.funds, [2, 0, 1])
    np.testing.assert_array_equal(net.total_liabilities, [1, 2, 0])
    assert net.liability("b", "c") == 2
    assert net.liability("c", "a") == 0
    assert net.ancestors("c") == {"a", "b", "c"}
    assert net.ancestors("a") == {"a"}


@pytest.mark.parametrize("funds,contracts,needle", [
    ({"a": 1}, [("a", "a", 1)], "self-loop"),
    ({"a": 1}, [("a", "x", 1)], "unknown bank"),
    ({"a": -1}, [], "funds must be"),
    ({"a": 1, "b": 0}, [("a", "b", 0)], "weight"),
])
def test_validate_reports_each_violation(funds, contracts, needle):
    net = FinancialNetwork.build(funds, contracts)
    assert any(needle in p for p in validate(net))


def test_validate_duplicate_ids_and_parallel_contracts():
    net = FinancialNetwork((Bank("a", 1), Bank("a", 2)), ())
    assert any("duplicate" in p for p in validate(net))
    net = FinancialNetwork((Bank("a", 1), Bank("b", 0)), (Contract("a", "b", 1), Contract("a", "b", 2)))
    assert any("parallel" in p for p in validate(net))


def test_beta_range_is_validated():
    assert validate(small().with_beta(0.5)) == []
    assert validate(small().with_beta(0.0))
    assert validate(small().with_beta(1.5))


def test_merge_parallel_sums_weights():
    merged = merge_parallel([Contract("a", "b", 1), Contract("a", "b", 2.5), Contract("b", "a", 1)])
    assert {c.key: c.weight for c in merged} == {("a", "b"): 3.5, ("b", "a"): 1}


def test_json_roundtrip(tmp_path):
    net = small().with_beta(0.75)
    path = tmp_path / "n.json"
    save(net, path)
    back = load(path)
    assert back.structurally_equal(net)
    assert loads(dumps(net)).beta == 0.75


def test_loader_merges_parallel_and_parses_fractions():
    data = {"banks": [{"id": "a", "funds": "1/3"}, {"id": "b", "funds": 0}],
            "contracts": [{"debtor": "a", "creditor": "b", "weight": 1},
                          {"debtor": "a", "creditor": "b", "weight": "1/2"}]}
    net = from_dict(data)
    assert net.funds_of("a") == pytest.approx(1 / 3)
    assert net.liability("a", "b") == 1.5


def test_loader_rejects_unknown_keys_and_invalid_networks():
    with pytest.raises(NetworkError):
        from_dict({"banks": [], "contracts": [], "extra": 1})
    with pytest.raises(NetworkError):
        loads(json.dumps({"banks": [{"id": "a", "funds": 1}],
                          "contracts": [{"debtor": "a", "creditor": "a", "weight": 1}]}))


def test_apply_shock_bounds():
    net = small()
    out = apply_shock(net, ShockVector({"a": 1.5}))
    assert out.funds_of("a") == 0.5
    assert net.funds_of("a") == 2  # original untouched
    with pytest.raises(NetworkError):
        apply_shock(net, {"a": 3})
    with pytest.raises(NetworkError):
        apply_shock(net, {"zz": 0.1})
    with pytest.raises(NetworkError):
        apply_shock(net, {"a": -0.1})


def test_proportional_shock_vector():
    sv = proportional_shock(small(), 0.25)
    assert sv.reductions == {"a": 0.5, "b": 0.0, "c": 0.25}
    assert sv.total() == 0.75
    with pytest.raises(NetworkError):
        proportional_shock(small(), 1.5)


def test_open_variant_structure():
    net = FinancialNetwork.build({"u1": 1, "v1": 0, "u2": 1, "v2": 0, "s1": 0},
                                 [("u1", "v1", 1), ("u2", "v2", 1), ("v1", "u2", 1), ("v2", "u1", 1)])
    opened, s1, s2, t1, t2 = open_variant(net, ("u1", "v1"), ("u2", "v2"))
    assert s1 != "s1" and len({s1, s2, t1, t2}) == 4
    assert opened.liability("u1", "v1") == 0 and opened.liability("u2", "v2") == 0
    assert opened.liability("u1", t1) == 1 and opened.liability("u2", t2) == 1
    assert opened.liability(s1, "v1") > net.funds.sum() + sum(c.weight for c in net.contracts)
    assert opened.outgoing(t1) == [] and opened.incoming(s1) == []
    assert validate(opened) == []
    with pytest.raises(NetworkError):
        open_variant(net, ("u1", "v1"), ("u1", "v1"))
