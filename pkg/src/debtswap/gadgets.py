"""Builders for the threshold gadgets, the densest-k reduction and the
reference networks used throughout the tests.

Where a weight or a fund value of a reference network is not pinned down by
its expected values, the builder uses the smallest choice consistent with
them; each such choice is listed in the fixture's ``note``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .network import FinancialNetwork, NetworkError, ensure_valid
from .swaps import PortfolioSwapSpec, ReorgSpec, SwapSpec


@dataclass(frozen=True)
class GadgetHandle:
    """A small network with one outgoing contract still to be attached.

    ``source`` owes ``weight`` to whichever bank the gadget is attached to.
    """

    network: FinancialNetwork
    source: str
    weight: float
    params: dict = field(default_factory=dict)

    def attach(self, target: str, funds: float = 0.0) -> FinancialNetwork:
        """The gadget plus a new bank ``target`` receiving the attachment."""
        return compose([self], {target: funds}, [], {self.source: target})


def compose(gadgets: Sequence[GadgetHandle], banks: dict[str, float],
            contracts: Iterable[tuple[str, str, float]],
            attach: dict[str, str] | None = None) -> FinancialNetwork:
    """Disjoint union of gadgets plus extra banks and contracts.

    ``attach`` maps a gadget's source bank to the creditor of its attachment.
    """
    funds: dict[str, float] = {}
    cs: list[tuple[str, str, float]] = []
    for g in gadgets:
        for b in g.network.banks:
            if b.id in funds:
                raise NetworkError(f"bank id {b.id!r} used by two parts")
            funds[b.id] = b.funds
        cs.extend((c.debtor, c.creditor, c.weight) for c in g.network.contracts)
    for b, f in banks.items():
        if b in funds:
            raise NetworkError(f"bank id {b!r} used by two parts")
        funds[b] = f
    handles = {g.source: g for g in gadgets}
    for src, target in (attach or {}).items():
        cs.append((src, target, handles[src].weight))
    cs.extend(contracts)
    return ensure_valid(FinancialNetwork.build(funds, cs))


def d_boolean(d: int, model: str = "worst_set", D: float | None = None, prefix: str = "g") -> GadgetHandle:
    """Gadget paying ``d`` until ``d`` of its banks are hit, then nothing.

    worst_set: ``d`` sources with funds ``d``, each owing ``d`` to a hub that
    owes ``d`` onwards. worst_sum: a single bank with funds ``D*d`` owing
    ``d``, which survives any loss short of ``(D-1)*d``.
    """
    if int(d) != d or d < 1:
        raise NetworkError(f"d must be a positive integer, got {d}")
    d = int(d)
    if model == "worst_set":
        hub = f"{prefix}_w"
        funds = {f"{prefix}_s{i}": float(d) for i in range(1, d + 1)}
        funds[hub] = 0.0
        cs = [(f"{prefix}_s{i}", hub, float(d)) for i in range(1, d + 1)]
        net = ensure_valid(FinancialNetwork.build(funds, cs))
        return GadgetHandle(net, hub, float(d), {"d": d, "model": model})
    if model == "worst_sum":
        if D is None or D <= d:
            raise NetworkError("worst_sum boolean gadget needs D > d")
        hub = f"{prefix}_w"
        net = FinancialNetwork.build({hub: float(D) * d}, [])
        return GadgetHandle(net, hub, float(d), {"d": d, "D": D, "model": model})
    raise NetworkError(f"unknown gadget model {model!r}")


def one_fix(K: int, model: str = "worst_set", prefix: str = "fix") -> GadgetHandle:
    """Gadget that keeps paying 1 under any shock within the budget ``K``."""
    if int(K) != K or K < 0:
        raise NetworkError(f"K must be a nonnegative integer, got {K}")
    K = int(K)
    hub = f"{prefix}_u"
    if model == "worst_set":
        funds = {f"{prefix}_s{i}": 1.0 for i in range(1, K + 2)}
        funds[hub] = 0.0
        cs = [(f"{prefix}_s{i}", hub, 1.0) for i in range(1, K + 2)]
        return GadgetHandle(FinancialNetwork.build(funds, cs), hub, 1.0, {"K": K, "model": model})
    if model == "worst_sum":
        return GadgetHandle(FinancialNetwork.build({hub: float(K + 2)}, []), hub, 1.0,
                            {"K": K, "model": model})
    raise NetworkError(f"unknown gadget model {model!r}")


def densest_k_reduction(edges: Iterable[tuple], vertices: Iterable | None = None,
                        model: str = "worst_set") -> tuple[FinancialNetwork, str]:
    """Network whose sink loses one unit per edge inside the wiped vertex set.

    Every vertex ``z`` becomes a bank ``s_<z>`` with funds ``deg(z)`` (the
    maximum degree for every vertex in the worst_sum variant) owing 1 to the
    bank of each incident edge; every edge bank ``u_<a>_<b>`` owes 1 to the
    sink ``v``. An edge bank keeps paying while at least one endpoint is
    spared, so the worst-set loss at ``v`` for k is the edge count of a
    densest k-vertex subgraph.
    """
    es = []
    seen = set()
    for e in edges:
        a, b = e
        if a == b:
            raise NetworkError(f"self-loop on vertex {a!r}")
        key = frozenset((a, b))
        if key in seen:
            raise NetworkError(f"repeated edge {a!r}-{b!r}")
        seen.add(key)
        es.append(tuple(sorted((a, b), key=str)))
    if not es:
        raise NetworkError("graph needs at least one edge")
    verts = sorted({z for e in es for z in e} | set(vertices or ()), key=str)
    deg = {z: 0 for z in verts}
    for a, b in es:
        deg[a] += 1
        deg[b] += 1
    top = max(deg.values())
    funds = {f"s_{z}": float(top if model == "worst_sum" else deg[z]) for z in verts}
    cs = []
    for a, b in es:
        u = f"u_{a}_{b}"
        funds[u] = 0.0
        cs += [(f"s_{a}", u, 1.0), (f"s_{b}", u, 1.0), (u, "v", 1.0)]
    funds["v"] = 0.0
    return ensure_valid(FinancialNetwork.build(funds, cs)), "v"


# -- reference networks -------------------------------------------------------

@dataclass(frozen=True)
class Fixture:
    """A reference network with the operation it is used for.

    ``operation`` is a SwapSpec, PortfolioSwapSpec, ReorgSpec or None;
    ``expected`` holds the published values the network must reproduce;
    ``note`` records any unstated detail filled in by the builder.
    """

    name: str
    network: FinancialNetwork
    acting: tuple[str, ...] = ()
    operation: SwapSpec | PortfolioSwapSpec | ReorgSpec | None = None
    expected: dict = field(default_factory=dict)
    note: str = ""


def _net(funds: dict, contracts: list, beta=None) -> FinancialNetwork:
    return ensure_valid(FinancialNetwork.build(funds, contracts, beta))


def _fig1() -> Fixture:
    funds = {"v1": 4, "v2": 2, "v3": 2, "v4": 0, "v5": 0}
    cs = [("v1", "v2", 1), ("v1", "v5", 1), ("v2", "v3", 5), ("v3", "v4", 3),
          ("v3", "v5", 6), ("v4", "v1", 2), ("v4", "v2", 2)]
    return Fixture("fig1", _net(funds, cs), expected={
        "assets": {"v1": 5, "v2": 4, "v3": 6, "v4": 2, "v5": 5}},
        note="weights reconstructed to reproduce the reference assets and default set {v2, v3, v4}")


def _motive_parts():
    funds = {"s1": 4, "s2": 4, "u0": 0, "u1": 0, "u2": 0, "u3": 0, "v1": 0, "v2": 0}
    cs = [("s1", "u0", 1), ("s1", "u1", 1), ("u0", "v1", 1), ("u1", "v1", 1),
          ("s2", "u2", 1), ("s2", "u3", 1), ("u2", "v2", 1), ("u3", "v2", 1)]
    return funds, cs


def _motive() -> Fixture:
    funds, cs = _motive_parts()
    return Fixture("motive", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "worst_set_before": {"v1": (2, 0, 0), "v2": (2, 0, 0)},
        "worst_set_after": {"v1": (2, 1, 0), "v2": (2, 1, 0)},
        "proportional_before": {"v1": ((0, 2), (0.5, 2), (1, 0))},
        "worst_sum_before": {"v1": ((0, 2), (2, 2), (4, 0), (8, 0))},
    }, note="unit chains s -> u -> v; only the reference shock functions constrain the weights")


def _expansive(x: float = 0.3) -> Fixture:
    funds = {"s": x, "u1": 0, "u2": 0, "t": 0}
    cs = [("s", "u1", 1), ("u1", "u2", 1), ("u2", "u1", 1), ("u2", "t", 1)]
    return Fixture("expansive", _net(funds, cs), expected={
        "payments": {("s", "u1"): x, ("u1", "u2"): 2 * x, ("u2", "u1"): x, ("u2", "t"): x}},
        note="unit weights; funds of s set to 0.3 (any value up to 1/2 gives the same shape)")


def _semipos(beta=None) -> Fixture:
    funds = {"u1": Fraction(1, 2), "u2": 1, "v1": 0, "v2": 0}
    cs = [("u1", "v1", 1), ("u2", "v2", 1), ("v1", "v2", 1)]
    return Fixture("semipos", _net(funds, cs, beta), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "assets_before": {"v1": 0.5, "v2": 1.5}, "assets_after": {"v1": 1.0, "v2": 1.5},
        "beta_half_before": {"v1": 0.25, "v2": 1.125}, "beta_half_after": {"v1": 1.0, "v2": 1.25},
    }, note="unit weights")


def _invariants() -> Fixture:
    funds = {"u1": Fraction(1, 2), "u2": Fraction(1, 2), "v1": 0, "v2": 0, "w": 0}
    cs = [("u1", "v1", 1), ("u2", "v2", 1), ("v2", "u2", 1), ("v2", "w", 1)]
    return Fixture("invariants", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "assets_before": {"v1": 0.5, "v2": 1.0}, "assets_after": {"v1": 0.75, "v2": 0.5}},
        note="topology found by search over 5-bank unit-weight networks; the swap breaks the cycle u2-v2")


def _badforw_parts():
    funds, cs = _motive_parts()
    funds.update({"u4": 0, "w": 0})
    cs += [("s2", "u4", 2), ("u4", "w", 2), ("v1", "w", 2)]
    return funds, cs


def _badforw() -> Fixture:
    funds, cs = _badforw_parts()
    return Fixture("badforw", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "worst_set_before": {"w": (4, 2, 0)}, "worst_set_after": {"w": (4, 1, 0)}},
        note="motive network plus s2 -> u4 -> w and v1 -> w, all of weight 2")


def _badforw_sum() -> Fixture:
    funds, cs = _badforw_parts()
    funds.update({"s1": 8, "s2": 8, "t": 0})
    cs += [("s1", "t", 2)]
    return Fixture("badforw_sum", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "worst_sum_after": {"w": ((0, 4), (4, 4), (8, 1), (12, 1), (16, 0))}},
        note="badforw with an extra debt of 2 from s1 to a new sink t; source funds raised to 8")


def _badforu_parts(e_s1=2):
    funds = {"s1": e_s1, "s2": 2, "u0": 0, "u1": 0, "u2": 0, "v1": 0, "v2": 0, "t": 0}
    cs = [("s1", "u0", 1), ("s1", "u1", 1), ("u0", "v1", 1), ("u1", "v1", 1),
          ("s2", "u2", 1), ("s2", "v2", 1), ("u2", "v2", 1), ("v1", "s2", 1), ("v1", "t", 2)]
    return funds, cs


def _badforu() -> Fixture:
    funds, cs = _badforu_parts()
    return Fixture("badforu", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "worst_set_before": {"v1": (2, 0, 0), "v2": (2, Fraction(2, 3), 0), "u2": (1, Fraction(1, 3), 0)},
        "worst_set_after": {"v1": (2, 1, 0), "v2": (2, 1, 0), "u2": (1, Fraction(1, 5), 0)},
    }, note="weights reconstructed so that every reference vector holds; v1 -> s2 closes the cycle")


def _badforu_sum() -> Fixture:
    funds, cs = _badforu_parts(Fraction(8, 3))
    t = Fraction(2, 3)
    return Fixture("badforu_sum", _net(funds, cs), ("v1", "v2"), SwapSpec(("u1", "v1"), ("u2", "v2")), {
        "worst_sum_before": {
            "v2": ((0, 2), (t, 2), (2, t), (2 + t, t), (4 + t, 0)),
            "u2": ((0, 1), (t, 1), (2, Fraction(1, 3)), (2 + t, Fraction(1, 3)), (4 + t, 0))},
        "worst_sum_after": {
            "u2": ((0, 1), (t, 1), (2, Fraction(1, 5)), (2 + t, Fraction(1, 5)), (4 + t, 0))},
    }, note="badforu with funds of s1 raised to 2+2/3; the reference after-swap list for u2 "
            "starts at 2 where the network gives 1, see decisions ledger")


def _treepos() -> Fixture:
    parts = []
    attach = {}
    for d in (3, 4, 5, 6):
        g = d_boolean(d, prefix=f"a{d}")
        parts.append(g)
        attach[g.source] = "v1"
    for d in (4, 6, 8):
        g = d_boolean(d, prefix=f"b{d}")
        parts.append(g)
        attach[g.source] = "v2"
    g3 = d_boolean(3, prefix="b3")
    fix = one_fix(10, prefix="fix")
    parts += [g3, fix]
    attach[g3.source] = "w"
    attach[fix.source] = "w"
    net = compose(parts, {"v1": 0, "v2": 0, "w": 0}, [("w", "v2", 4)], attach)
    return Fixture("treepos", net, ("v1", "v2"), SwapSpec(("a4_w", "v1"), ("w", "v2")), {
        "worst_set_before": {"v1": (18, 18, 18, 15, 14, 13, 12, 11, 10, 9, 8),
                             "v2": (22, 22, 22, 19, 18, 18, 16, 15, 14, 13, 12)},
        "worst_set_after": {"v1": (18, 18, 18, 15, 15, 13, 12, 12, 10, 9, 9),
                            "v2": (22, 22, 22, 22, 18, 18, 16, 16, 14, 14, 12)},
    }, note="v1 holds 3-,4-,5-,6-boolean gadgets; v2 holds 4-,6-,8-boolean gadgets and bank w, "
            "fed by a 3-boolean gadget and a 1-fix gadget for K=10, owing 4 to v2")


PORTFOLIO_DEBTS = ((2, 17), (7, 12), (12, 7), (16, 3), (5, 14), (5, 14), (10, 9), (19, 0))


def _portfolio76() -> Fixture:
    funds = {"s1": 76, "s2": 76, "v1": 0, "v2": 0}
    cs = []
    for i, (a, b) in enumerate(PORTFOLIO_DEBTS, start=1):
        x = f"x{i}"
        funds[x] = 0
        if a:
            cs.append(("s1", x, a))
        if b:
            cs.append(("s2", x, b))
        cs.append((x, "v1" if i <= 4 else "v2", 19))
    spec = PortfolioSwapSpec("v1", "v2", ("x2", "x4"), ("x5", "x8"))
    return Fixture("portfolio76", _net(funds, cs), ("v1", "v2"), spec, {
        "worst_set_before": {"v1": (76, 37, 0), "v2": (76, 37, 0)},
        "worst_set_after": {"v1": (76, 38, 0), "v2": (76, 38, 0)},
        "worst_sum_before": {"v1": ((0, 76), (76, 37), (152, 0)), "v2": ((0, 76), (76, 37), (152, 0))},
        "worst_sum_after": {"v1": ((0, 76), (152, 0)), "v2": ((0, 76), (152, 0))},
    }, note="intermediates x1..x4 owe 19 to v1 and x5..x8 owe 19 to v2; a zero entry means no contract; "
            "worst-sum kinks sit at 76 and 152 because each source holds 76")


def _reorg3() -> Fixture:
    funds = {f"s{i}": 3 for i in (1, 2, 3)}
    cs = []
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            funds[f"u{i}{j}"] = 0
            cs.append((f"s{i}", f"u{i}{j}", 1))
    funds.update({"v1": 0, "v2": 0, "v3": 0})
    owners = {"v1": ("u11", "u12", "u23"), "v2": ("u21", "u22", "u33"), "v3": ("u31", "u32", "u13")}
    for v, us in owners.items():
        cs += [(u, v, 1) for u in us]
    spec = ReorgSpec((("u12", "v1"), ("u22", "v2"), ("u32", "v3")), (1, 2, 0))
    return Fixture("reorg3", _net(funds, cs), ("v1", "v2", "v3"), spec, {
        "worst_set_before": {v: (3, 1, 0, 0) for v in owners},
        "worst_set_after": {v: (3, 2, 1, 0) for v in owners},
        "worst_sum_before": {v: ((0, 3), (3, 1), (6, 0), (9, 0)) for v in owners},
        "worst_sum_after": {v: ((0, 3), (9, 0)) for v in owners},
    }, note="each v_i holds two contracts from s_i's intermediates and one from another source")


FIXTURES = {
    "fig1": _fig1,
    "motive": _motive,
    "expansive": _expansive,
    "semipos": _semipos,
    "invariants": _invariants,
    "badforw": _badforw,
    "badforu": _badforu,
    "treepos": _treepos,
    "portfolio76": _portfolio76,
    "reorg3": _reorg3,
    "badforw_sum": _badforw_sum,
    "badforu_sum": _badforu_sum,
}


def paper_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise NetworkError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}") from None
