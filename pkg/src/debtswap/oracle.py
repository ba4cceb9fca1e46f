"""Independent reference computations and randomized property harnesses.

Nothing here reuses the compiled kernels: clearing is recomputed by a plain
batched Picard iteration built straight from the contract list, enumeration
is naive, and an optional LP formulation gives a third route to the maximal
clearing vector.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .network import FinancialNetwork, NetworkError, to_dict

ORACLE_TOL = 1e-13
ORACLE_MAX_ITER = 200_000
CHECK_TOL = 1e-7


# -- clearing -------------------------------------------------------------------

def _matrices(network: FinancialNetwork):
    ids = [b.id for b in network.banks]
    pos = {b: i for i, b in enumerate(ids)}
    n = len(ids)
    L = np.zeros((n, n))
    for c in network.contracts:
        L[pos[c.debtor], pos[c.creditor]] += c.weight
    e = np.array([b.funds for b in network.banks], dtype=float)
    return ids, pos, e, L


def oracle_assets(network: FinancialNetwork, E: np.ndarray | None = None) -> np.ndarray:
    """Assets of every bank for each funds vector (row of ``E``).

    Batched Picard iteration from full repayment; rows stop changing once
    the update falls below ``ORACLE_TOL``.
    """
    _, _, e, L = _matrices(network)
    E = np.atleast_2d(e if E is None else E).astype(float)
    l = L.sum(axis=1)
    beta = network.beta
    owed = l > 0
    R = np.ones_like(E)
    for _ in range(ORACLE_MAX_ITER):
        A = E + R @ L
        pay = np.where(A >= l, 1.0, beta * A / np.where(owed, l, 1.0))
        nR = np.where(owed, pay, 1.0)
        done = np.max(np.abs(nR - R)) <= ORACLE_TOL
        R = nR
        if done:
            break
    else:
        raise RuntimeError("oracle Picard iteration did not converge")
    return E + R @ L


def lp_clearing(network: FinancialNetwork) -> dict[str, float]:
    """Assets from the LP ``max sum(p)`` s.t. ``p <= l``, ``p <= e + Pi^T p``.

    Its optimum is the greatest clearing payment vector of the plain model.
    """
    from scipy.optimize import linprog

    ids, _, e, L = _matrices(network)
    l = L.sum(axis=1)
    n = len(ids)
    if n == 0:
        return {}
    Pi = np.divide(L, l[:, None], out=np.zeros_like(L), where=l[:, None] > 0)
    A_ub = np.eye(n) - Pi.T
    res = linprog(-np.ones(n), A_ub=A_ub, b_ub=e, bounds=list(zip(np.zeros(n), l)), method="highs")
    if not res.success:
        raise RuntimeError(f"LP failed: {res.message}")
    a = e + Pi.T @ res.x
    return dict(zip(ids, map(float, a)))


# -- brute-force shock values ----------------------------------------------------

def brute_worst_set(network: FinancialNetwork, v: str, k: int, budget: int = 2 ** 20) -> float:
    """Minimum of ``a_v`` over every k-subset of banks wiped, no pruning at all."""
    ids, pos, e, _ = _matrices(network)
    n = len(ids)
    if not 0 <= k <= n:
        raise NetworkError(f"k must lie in [0, {n}]")
    if math.comb(n, k) > budget:
        raise RuntimeError(f"{math.comb(n, k)} subsets exceed the oracle budget {budget}")
    best = math.inf
    t = pos[v]
    for chunk in _batched(itertools.combinations(range(n), k), 4096):
        E = np.tile(e, (len(chunk), 1))
        for i, sub in enumerate(chunk):
            E[i, list(sub)] = 0.0
        best = min(best, float(oracle_assets(network, E)[:, t].min()))
    return best


def brute_worst_sum_grid(network: FinancialNetwork, v: str, rho: float, step: float) -> float:
    """Minimum of ``a_v`` over all splits of ``rho`` into multiples of ``step``.

    Every grid allocation is a feasible shock, so the result bounds the true
    worst-sum value from above.
    """
    ids, pos, e, _ = _matrices(network)
    n = len(ids)
    if n > 5:
        raise NetworkError("grid oracle limited to networks of at most 5 banks")
    if rho == 0:
        return float(oracle_assets(network)[0, pos[v]])
    units = int(round(rho / step))
    if abs(units * step - rho) > 1e-9 * max(1.0, rho):
        raise NetworkError("rho must be a multiple of step")
    caps = [int(math.floor(x / step + 1e-9)) for x in e]
    rows = []
    for comp in _compositions(units, caps):
        rows.append(e - np.array(comp) * step)
    if not rows:
        return math.inf
    vals = oracle_assets(network, np.maximum(np.array(rows), 0.0))[:, pos[v]]
    return float(vals.min())


def _compositions(total: int, caps: Sequence[int]):
    if not caps:
        if total == 0:
            yield ()
        return
    for c in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - c, caps[1:]):
            yield (c,) + rest


def _batched(it, size):
    buf = []
    for x in it:
        buf.append(x)
        if len(buf) == size:
            yield buf
            buf = []
    if buf or size == 0:
        yield buf


# -- lemma probes --------------------------------------------------------------------

@dataclass
class ProbeResult:
    probe: tuple
    before: float
    after: float
    ok: bool
    sink: bool
    factor: float | None = None


@dataclass
class LemmaReport:
    lemma: str
    results: list[ProbeResult] = field(default_factory=list)

    @property
    def violations(self) -> list[ProbeResult]:
        """Failures that the lemma rules out (sinks only for non-expansivity)."""
        if self.lemma == "nonexpansivity":
            return [r for r in self.results if not r.ok and r.sink]
        return [r for r in self.results if not r.ok]

    @property
    def flagged(self) -> list[ProbeResult]:
        """Expected failures at non-sinks, where the lemma does not apply."""
        if self.lemma != "nonexpansivity":
            return []
        return [r for r in self.results if not r.ok and not r.sink]

    @property
    def ok(self) -> bool:
        return not self.violations


def _sinks(network: FinancialNetwork) -> set[str]:
    debtors = {c.debtor for c in network.contracts}
    return {b.id for b in network.banks if b.id not in debtors}


def _bumped(network, s, delta):
    ids, pos, e, _ = _matrices(network)
    E = np.vstack([e, e])
    E[1, pos[s]] += delta
    return pos, oracle_assets(network, E)


def check_monotonicity(network: FinancialNetwork, probes: Iterable[tuple[str, str, float]]) -> LemmaReport:
    """Raising the funds of ``s`` by ``delta`` never lowers the assets of ``t``."""
    rep = LemmaReport("monotonicity")
    sinks = _sinks(network)
    for s, t, delta in probes:
        pos, A = _bumped(network, s, delta)
        a0, a1 = A[0, pos[t]], A[1, pos[t]]
        rep.results.append(ProbeResult((s, t, delta), a0, a1, a1 >= a0 - CHECK_TOL, t in sinks))
    return rep


def check_nonexpansivity(network: FinancialNetwork, probes: Iterable[tuple[str, str, float]]) -> LemmaReport:
    """Raising the funds of ``s`` by ``delta`` raises a sink's assets by at most ``delta``.

    Non-sink targets are probed as well; exceeding ``delta`` there is
    reported under ``flagged`` rather than as a violation.
    """
    rep = LemmaReport("nonexpansivity")
    sinks = _sinks(network)
    for s, t, delta in probes:
        pos, A = _bumped(network, s, delta)
        a0, a1 = A[0, pos[t]], A[1, pos[t]]
        factor = (a1 - a0) / delta if delta > 0 else None
        rep.results.append(ProbeResult((s, t, delta), a0, a1, a1 <= a0 + delta + CHECK_TOL, t in sinks, factor))
    return rep


def check_concavity(network: FinancialNetwork, probes: Iterable[tuple[str, str, float, float]]) -> LemmaReport:
    """Assets of a sink ``t`` are concave in the funds of ``s``.

    Each probe ``(s, t, x, y)`` compares the value at the midpoint of funds
    ``x`` and ``y`` with the average of the two end values.
    """
    rep = LemmaReport("concavity")
    sinks = _sinks(network)
    for s, t, x, y in probes:
        ids, pos, e, _ = _matrices(network)
        E = np.vstack([e, e, e])
        E[:, pos[s]] = [x, y, 0.5 * (x + y)]
        A = oracle_assets(network, E)[:, pos[t]]
        chord = 0.5 * (A[0] + A[1])
        rep.results.append(ProbeResult((s, t, x, y), chord, A[2], A[2] >= chord - CHECK_TOL, t in sinks))
    return rep


def random_probes(network: FinancialNetwork, count: int, seed: int, sinks_only: bool = True):
    """Deterministic probe lists ``(mono_nonexp, concavity)`` for a network."""
    rng = np.random.default_rng(seed)
    ids = [b.id for b in network.banks]
    targets = sorted(_sinks(network)) if sinks_only else ids
    targets = targets or ids
    pairs, triples = [], []
    for _ in range(count):
        s = ids[rng.integers(len(ids))]
        t = targets[rng.integers(len(targets))]
        pairs.append((s, t, float(rng.uniform(0.01, 3.0))))
        x, y = sorted(rng.uniform(0.0, 6.0, size=2))
        triples.append((s, t, float(x), float(y)))
    return pairs, triples


# -- random networks --------------------------------------------------------------------

@dataclass(frozen=True)
class RandomNetworkParams:
    seed: int
    n: int = 6
    edge_prob: float = 0.35
    funds_range: tuple[float, float] = (0.0, 4.0)
    weight_range: tuple[float, float] = (1.0, 3.0)
    cyclic: bool = True
    integer: bool = True
    zero_funds_prob: float = 0.4


def random_network(params: RandomNetworkParams) -> FinancialNetwork:
    """Seeded random network; ``cyclic=False`` keeps every edge forward in a random order.

    With ``integer=True`` funds and weights are integers, so equal-weight
    contract pairs (and hence valid swaps) are common.
    """
    rng = np.random.default_rng(params.seed)
    n = params.n
    ids = [f"b{i}" for i in range(n)]
    order = rng.permutation(n)
    rank = {int(b): i for i, b in enumerate(order)}
    lo, hi = params.funds_range
    wlo, whi = params.weight_range
    funds = {}
    for b in ids:
        if rng.random() < params.zero_funds_prob:
            funds[b] = 0.0
        elif params.integer:
            funds[b] = float(rng.integers(int(math.ceil(lo)), int(math.floor(hi)) + 1))
        else:
            funds[b] = float(rng.uniform(lo, hi))
    cs = []
    for i in range(n):
        for j in range(n):
            if i == j or rng.random() >= params.edge_prob:
                continue
            if not params.cyclic and rank[i] > rank[j]:
                continue
            if params.integer:
                w = float(rng.integers(int(wlo), int(whi) + 1))
            else:
                w = float(rng.uniform(wlo, whi))
            if w > 0:
                cs.append((ids[i], ids[j], w))
    return FinancialNetwork.build(funds, cs)


def random_tree(seed: int, n: int, max_funds: int = 3, max_weight: int = 3) -> FinancialNetwork:
    """Seeded random tree with random edge orientations and integer data."""
    rng = np.random.default_rng(seed)
    ids = [f"t{i}" for i in range(n)]
    funds = {b: float(rng.integers(0, max_funds + 1)) for b in ids}
    cs = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        w = float(rng.integers(1, max_weight + 1))
        cs.append((ids[i], ids[j], w) if rng.random() < 0.6 else (ids[j], ids[i], w))
    return FinancialNetwork.build(funds, cs)


# -- theorem harness --------------------------------------------------------------------

THEOREMS = ("nopos_base", "noport_base", "nopos_prop")


@dataclass
class HarnessReport:
    theorem: str
    trials: int
    seed: int
    specs_checked: int = 0
    verdicts: dict = field(default_factory=dict)
    counterexamples: list = field(default_factory=list)

    @property
    def positives(self) -> int:
        return len(self.counterexamples)

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def _portfolio_specs(network: FinancialNetwork, rng, limit: int = 40):
    from .swaps import PortfolioSwapSpec, SwapError, check_portfolio_swap

    ids = network.bank_ids
    specs = []
    for v1, v2 in itertools.combinations(ids, 2):
        d1 = [c.debtor for c in network.incoming(v1) if c.debtor != v2]
        d2 = [c.debtor for c in network.incoming(v2) if c.debtor != v1]
        for r1 in range(1, min(3, len(d1)) + 1):
            for U1 in itertools.combinations(d1, r1):
                for r2 in range(1, min(3, len(d2)) + 1):
                    for U2 in itertools.combinations(d2, r2):
                        spec = PortfolioSwapSpec(v1, v2, U1, U2)
                        try:
                            check_portfolio_swap(network, spec)
                        except SwapError:
                            continue
                        specs.append(spec)
    if len(specs) > limit:
        idx = sorted(rng.choice(len(specs), size=limit, replace=False))
        specs = [specs[i] for i in idx]
    return specs


def _minimize(network: FinancialNetwork, op, still_bad) -> FinancialNetwork:
    """Greedily drop contracts and funds while ``still_bad`` keeps holding."""
    from .swaps import PortfolioSwapSpec, SwapSpec

    if isinstance(op, SwapSpec):
        keep = {op.c1, op.c2}
    elif isinstance(op, PortfolioSwapSpec):
        keep = {(u, op.v1) for u in op.U1} | {(u, op.v2) for u in op.U2}
    else:
        keep = set()
    cur = network
    changed = True
    while changed:
        changed = False
        for c in sorted(cur.contracts, key=lambda c: c.key):
            if c.key in keep:
                continue
            cand = cur.with_contracts([x for x in cur.contracts if x.key != c.key])
            if still_bad(cand):
                cur, changed = cand, True
                break
        if changed:
            continue
        for b in cur.banks:
            if b.funds > 0:
                cand = cur.with_funds({b.id: 0.0})
                if still_bad(cand):
                    cur, changed = cand, True
                    break
    return cur


def theorem_harness(theorem: str, trials: int, seed: int, out_dir: str | Path | None = None,
                    n_range: tuple[int, int] = (3, 8)) -> HarnessReport:
    """Search random cyclic networks for a Positive operation the theorem forbids.

    ``nopos_base`` and ``nopos_prop`` try every valid swap under the base and
    proportional models; ``noport_base`` tries portfolio swaps with up to
    three debtors per side in the base model. Any hit is minimized and, when
    ``out_dir`` is given, written there as JSON.
    """
    from .swaps import (ShockModel, Verdict, apply_portfolio_swap, apply_swap, candidate_swaps,
                        compare_functions, shock_function, verdict_of)

    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; choose from {THEOREMS}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    model = ShockModel("proportional" if theorem == "nopos_prop" else "base")
    rep = HarnessReport(theorem, trials, seed)
    children = np.random.SeedSequence(seed).spawn(trials)
    for trial, child in enumerate(children):
        rng = np.random.default_rng(child)
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        params = RandomNetworkParams(seed=int(rng.integers(2 ** 31)), n=n,
                                     edge_prob=float(rng.uniform(0.25, 0.6)))
        net = random_network(params)
        if theorem == "noport_base":
            ops = _portfolio_specs(net, rng)
            apply = apply_portfolio_swap
        else:
            ops = candidate_swaps(net)
            apply = apply_swap
        cache = {}

        def before(b, network=net):
            if b not in cache:
                cache[b] = shock_function(network, b, model)
            return cache[b]

        for op in ops:
            after_net = apply(net, op)
            comps = [compare_functions(b, before(b), shock_function(after_net, b, model)) for b in op.acting]
            verdict = verdict_of(comps)
            rep.specs_checked += 1
            rep.verdicts[verdict.value] = rep.verdicts.get(verdict.value, 0) + 1
            if verdict is Verdict.POSITIVE:
                def still_bad(candidate, op=op):
                    try:
                        a = apply(candidate, op)
                        cs = [compare_functions(b, shock_function(candidate, b, model),
                                                shock_function(a, b, model)) for b in op.acting]
                    except NetworkError:
                        return False
                    return verdict_of(cs) is Verdict.POSITIVE
                small = _minimize(net, op, still_bad)
                record = {"theorem": theorem, "trial": trial, "params": params.__dict__,
                          "operation": repr(op), "network": to_dict(small)}
                rep.counterexamples.append(record)
                if out_dir is not None:
                    path = Path(out_dir)
                    path.mkdir(parents=True, exist_ok=True)
                    (path / f"{theorem}_trial{trial}.json").write_text(json.dumps(record, indent=2, default=str))
    return rep
