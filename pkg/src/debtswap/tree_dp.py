"""Worst-set shock functions on tree networks in polynomial time.

When the undirected contract graph is a forest, the debtors of a bank sit
in disjoint subtrees, so a shock of size k splits into independent shocks
of the children. The worst split is a (min, +) convolution of the
children's shock functions after passing each through its payment clamp
``p(a) = min(a * l_wu / l_w, l_wu)``, which is nondecreasing in ``a``.

A bank with more than two debtors is merged pairwise through zero-fund
intermediates with unbounded liability, and a bank's own funds enter as an
auxiliary source with shock function ``(e_u, 0, 0, ...)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from . import _kernels
from .network import FinancialNetwork, NetworkError, ensure_valid
from .shocks import DiscreteShockFunction


class NotATreeError(NetworkError):
    """The contract graph has an undirected cycle (listed in ``cycle``)."""

    def __init__(self, cycle):
        super().__init__("contract graph is not a forest; cycle: " + " - ".join(cycle))
        self.cycle = cycle


@dataclass(frozen=True)
class TreeCertificate:
    """Evidence that a network is a forest, plus the DP's processing plan.

    ``order`` lists banks so that every debtor comes before its creditors;
    ``neighbors`` is the undirected adjacency; ``auxiliary`` names the
    own-funds sources and binary-merge intermediates the DP will introduce.
    """

    order: tuple[str, ...]
    neighbors: dict[str, tuple[str, ...]]
    auxiliary: tuple[str, ...] = ()


@dataclass
class TreeResult:
    function: DiscreteShockFunction
    merge_steps: int
    certificate: TreeCertificate
    nodes: int = 0
    extra: dict = field(default_factory=dict)


def _graph(network: FinancialNetwork) -> nx.MultiGraph:
    G = nx.MultiGraph()
    G.add_nodes_from(network.bank_ids)
    G.add_edges_from(c.key for c in network.contracts)
    return G


def is_tree(network: FinancialNetwork) -> tuple[bool, TreeCertificate | list[str]]:
    """Check the undirected contract graph is acyclic.

    Returns ``(True, certificate)`` or ``(False, cycle)`` where the cycle is a
    closed list of bank ids.
    """
    ensure_valid(network)
    G = _graph(network)
    try:
        edges = nx.find_cycle(G, orientation="ignore")
    except nx.NetworkXNoCycle:
        pass
    else:
        cycle = [e[0] for e in edges] + [edges[0][0]]
        return False, cycle
    D = nx.DiGraph()
    D.add_nodes_from(network.bank_ids)
    D.add_edges_from(c.key for c in network.contracts)
    rank = network.index
    order = tuple(nx.lexicographical_topological_sort(D, key=rank.__getitem__))
    neighbors = {b: tuple(sorted(G.neighbors(b), key=rank.__getitem__)) for b in network.bank_ids}
    aux = []
    for b in network.bank_ids:
        if network.funds_of(b) > 0:
            aux.append(f"{b}#funds")
        fan_in = len(network.incoming(b)) + (network.funds_of(b) > 0)
        aux.extend(f"{b}#merge{i}" for i in range(1, fan_in - 1))
    return True, TreeCertificate(order, neighbors, tuple(aux))


def tree_worst_set(network: FinancialNetwork, v: str, K: int, child_order: str = "given",
                   seed: int | None = None) -> TreeResult:
    """Worst-set shock function of ``v`` for k = 0..K on a forest network.

    Only ancestors of ``v`` matter; components not containing ``v`` cannot
    reach it and are ignored. ``child_order`` may be ``"given"``,
    ``"reversed"`` or ``"shuffled"`` (with ``seed``) to exercise the order
    independence of the merge.
    """
    ok, cert = is_tree(network)
    if not ok:
        raise NotATreeError(cert)
    if v not in network.index:
        raise NetworkError(f"unknown bank {v!r}")
    if network.beta != 1.0:
        raise NetworkError("tree DP covers the plain model only (no default costs)")
    if not 0 <= K <= network.n:
        raise NetworkError(f"K must lie in [0, {network.n}], got {K}")
    anc = network.ancestors(v)
    rng = np.random.default_rng(seed)
    l_tot = {b: float(network.total_liabilities[network.index[b]]) for b in network.bank_ids}
    f: dict[str, np.ndarray] = {}
    steps = 0
    nodes = 0
    for u in cert.order:
        if u not in anc:
            continue
        parts = []
        e = network.funds_of(u)
        if e > 0:
            own = np.zeros(K + 1)
            own[0] = e
            parts.append(own)
            nodes += 1
        for c in network.incoming(u):
            fw = f[c.debtor]
            parts.append(np.minimum(fw * (c.weight / l_tot[c.debtor]), c.weight))
        if child_order == "reversed":
            parts.reverse()
        elif child_order == "shuffled":
            parts = [parts[i] for i in rng.permutation(len(parts))]
        elif child_order != "given":
            raise ValueError(f"unknown child order {child_order!r}")
        nodes += 1 + max(len(parts) - 2, 0)
        acc = parts[0] if parts else np.zeros(K + 1)
        for p in parts[1:]:
            acc, s = _kernels.min_plus(acc, p, K)
            steps += int(s)
        f[u] = acc
    fn = DiscreteShockFunction(v, tuple(float(x) for x in f[v]), None)
    return TreeResult(fn, steps, cert, nodes)
