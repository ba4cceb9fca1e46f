"""Debt swaps, portfolio swaps and multi-party reorganizations.

A swap exchanges two equal-weight incoming contracts between two creditors:
``u1 -> v1`` and ``u2 -> v2`` become ``u1 -> v2`` and ``u2 -> v1``. Every
bank keeps its total incoming and outgoing liabilities, so any change in
outcome comes from the rewired topology alone.

Classification compares the acting banks' shock functions before and after
the operation under one of four models (base, proportional, worst-set,
worst-sum).
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .clearing import solve
from .network import Contract, FinancialNetwork, NetworkError, ensure_valid
from .shocks import (BudgetExceededError, DEFAULT_BUDGET, DiscreteShockFunction, PwlShockFunction,
                     proportional_shock_function, worst_set_function, worst_sum_function)

STRICT_TOL = 1e-7
WEIGHT_RTOL = 1e-12


class SwapError(NetworkError):
    """The requested operation violates its preconditions."""


def _same_weight(a: float, b: float) -> bool:
    return a == b or math.isclose(a, b, rel_tol=WEIGHT_RTOL, abs_tol=0.0)


@dataclass(frozen=True)
class SwapSpec:
    """Exchange of contracts ``c1 = (u1, v1)`` and ``c2 = (u2, v2)``."""

    c1: tuple[str, str]
    c2: tuple[str, str]

    @property
    def acting(self) -> tuple[str, str]:
        return self.c1[1], self.c2[1]

    @property
    def debtors(self) -> tuple[str, str]:
        return self.c1[0], self.c2[0]

    def canonical(self) -> "SwapSpec":
        return self if self.c1 <= self.c2 else SwapSpec(self.c2, self.c1)

    def label(self) -> str:
        return f"{self.c1[0]}->{self.c1[1]} <-> {self.c2[0]}->{self.c2[1]}"


@dataclass(frozen=True)
class PortfolioSwapSpec:
    """``v1`` hands its claims on ``U1`` to ``v2`` and takes ``v2``'s claims on ``U2``."""

    v1: str
    v2: str
    U1: tuple[str, ...]
    U2: tuple[str, ...]

    @property
    def acting(self) -> tuple[str, str]:
        return self.v1, self.v2


@dataclass(frozen=True)
class ReorgSpec:
    """Contract ``i`` (``u_i -> v_i``) is redirected to ``v_{permutation[i]}``."""

    contracts: tuple[tuple[str, str], ...]
    permutation: tuple[int, ...]

    @property
    def acting(self) -> tuple[str, ...]:
        return tuple(c[1] for c in self.contracts)


def check_swap(network: FinancialNetwork, spec: SwapSpec) -> float:
    """Validate ``spec`` against ``network`` and return the common weight."""
    (u1, v1), (u2, v2) = spec.c1, spec.c2
    for b in (u1, v1, u2, v2):
        if b not in network.index:
            raise SwapError(f"unknown bank {b!r}")
    if len({u1, v1, u2, v2}) != 4:
        raise SwapError(f"shared endpoints: banks {u1}, {v1}, {u2}, {v2} must be pairwise distinct")
    d1, d2 = network.liability(u1, v1), network.liability(u2, v2)
    if d1 <= 0:
        raise SwapError(f"missing contract {u1}->{v1}")
    if d2 <= 0:
        raise SwapError(f"missing contract {u2}->{v2}")
    if not _same_weight(d1, d2):
        raise SwapError(f"unequal weights: {u1}->{v1} has {d1}, {u2}->{v2} has {d2}")
    for a, b in ((u1, v2), (u2, v1)):
        if network.liability(a, b) > 0:
            raise SwapError(f"pre-existing cross contract {a}->{b}")
    return d1


def _rewire(network: FinancialNetwork, moves: dict[tuple[str, str], str]) -> FinancialNetwork:
    """Redirect each contract key in ``moves`` to the given new creditor."""
    out = []
    for c in network.contracts:
        if c.key in moves:
            out.append(Contract(c.debtor, moves[c.key], c.weight))
        else:
            out.append(c)
    return network.with_contracts(out)


def apply_swap(network: FinancialNetwork, spec: SwapSpec) -> FinancialNetwork:
    check_swap(network, spec)
    (u1, v1), (u2, v2) = spec.c1, spec.c2
    return _rewire(network, {(u1, v1): v2, (u2, v2): v1})


def check_portfolio_swap(network: FinancialNetwork, spec: PortfolioSwapSpec) -> float:
    v1, v2 = spec.v1, spec.v2
    for b in (v1, v2, *spec.U1, *spec.U2):
        if b not in network.index:
            raise SwapError(f"unknown bank {b!r}")
    if v1 == v2:
        raise SwapError("acting banks must differ")
    U1, U2 = set(spec.U1), set(spec.U2)
    if len(U1) != len(spec.U1) or len(U2) != len(spec.U2):
        raise SwapError("repeated debtor in portfolio")
    if U1 & U2:
        raise SwapError(f"debtor sets overlap: {sorted(U1 & U2)}")
    if {v1, v2} & (U1 | U2):
        raise SwapError("acting banks cannot be debtors of the swapped portfolio")
    for u in spec.U1:
        if network.liability(u, v1) <= 0:
            raise SwapError(f"missing contract {u}->{v1}")
        if network.liability(u, v2) > 0:
            raise SwapError(f"pre-existing cross contract {u}->{v2}")
    for u in spec.U2:
        if network.liability(u, v2) <= 0:
            raise SwapError(f"missing contract {u}->{v2}")
        if network.liability(u, v1) > 0:
            raise SwapError(f"pre-existing cross contract {u}->{v1}")
    s1 = sum(network.liability(u, v1) for u in spec.U1)
    s2 = sum(network.liability(u, v2) for u in spec.U2)
    if not _same_weight(s1, s2):
        raise SwapError(f"unequal portfolio totals: {s1} vs {s2}")
    return s1


def apply_portfolio_swap(network: FinancialNetwork, spec: PortfolioSwapSpec) -> FinancialNetwork:
    check_portfolio_swap(network, spec)
    moves = {(u, spec.v1): spec.v2 for u in spec.U1}
    moves.update({(u, spec.v2): spec.v1 for u in spec.U2})
    return _rewire(network, moves)


def check_reorg(network: FinancialNetwork, spec: ReorgSpec) -> float:
    m = len(spec.contracts)
    perm = tuple(spec.permutation)
    if sorted(perm) != list(range(m)):
        raise SwapError(f"not a permutation of 0..{m - 1}: {perm}")
    if m < 2 or any(perm[i] == i for i in range(m)):
        raise SwapError("permutation must be fixed-point free")
    banks = [b for c in spec.contracts for b in c]
    for b in banks:
        if b not in network.index:
            raise SwapError(f"unknown bank {b!r}")
    if len(set(banks)) != len(banks):
        raise SwapError("reorganized contracts must have pairwise distinct endpoints")
    weights = [network.liability(u, v) for u, v in spec.contracts]
    for (u, v), w in zip(spec.contracts, weights):
        if w <= 0:
            raise SwapError(f"missing contract {u}->{v}")
    if not all(_same_weight(w, weights[0]) for w in weights):
        raise SwapError(f"weight mismatch among reorganized contracts: {weights}")
    for i, (u, _) in enumerate(spec.contracts):
        for j, (_, v) in enumerate(spec.contracts):
            if i != j and network.liability(u, v) > 0:
                raise SwapError(f"pre-existing cross contract {u}->{v}")
    return weights[0]


def apply_reorg(network: FinancialNetwork, spec: ReorgSpec) -> FinancialNetwork:
    check_reorg(network, spec)
    moves = {(u, v): spec.contracts[spec.permutation[i]][1] for i, (u, v) in enumerate(spec.contracts)}
    return _rewire(network, moves)


def inverse_reorg(spec: ReorgSpec) -> ReorgSpec:
    """Spec undoing ``spec`` on the reorganized network."""
    m = len(spec.contracts)
    inv = [0] * m
    for i, p in enumerate(spec.permutation):
        inv[p] = i
    moved = tuple((spec.contracts[i][0], spec.contracts[spec.permutation[i]][1]) for i in range(m))
    return ReorgSpec(moved, tuple(inv))


# -- shock models ---------------------------------------------------------------

@dataclass(frozen=True)
class ShockModel:
    """``kind`` is one of base, proportional, worst_set, worst_sum."""

    kind: str
    K: int | None = None
    max_depth: int = 12
    chord_tol: float = 1e-9
    budget: int = DEFAULT_BUDGET

    KINDS = ("base", "proportional", "worst_set", "worst_sum")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown shock model {self.kind!r}")
        if self.kind == "worst_set" and (self.K is None or self.K < 0):
            raise ValueError("worst_set model needs K >= 0")

    @classmethod
    def parse(cls, text: str) -> "ShockModel":
        """Accepts ``base``, ``proportional``, ``worst_sum`` and ``worst_set(K)``."""
        t = text.strip().lower().replace("-", "_")
        m = re.fullmatch(r"worst_set\((\d+)\)", t)
        if m:
            return cls("worst_set", int(m.group(1)))
        return cls(t)

    def __str__(self):
        return f"worst_set({self.K})" if self.kind == "worst_set" else self.kind


def shock_function(network: FinancialNetwork, bank: str, model: ShockModel):
    if model.kind == "base":
        return DiscreteShockFunction(bank, (solve(network).assets[bank],), None)
    if model.kind == "worst_set":
        return worst_set_function(network, bank, min(model.K, network.n), model.budget)
    if model.kind == "proportional":
        return proportional_shock_function(network, bank)
    return worst_sum_function(network, bank, model.max_depth, model.chord_tol, model.budget)


# -- verdicts ---------------------------------------------------------------------

class Verdict(str, enum.Enum):
    POSITIVE = "Positive"
    SEMI_POSITIVE = "SemiPositive"
    NEUTRAL = "Neutral"
    NOT_DOMINANT = "NotDominant"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BankComparison:
    """Pointwise comparison of one bank's shock function before and after."""

    bank: str
    points: tuple[float, ...]
    before: tuple[float, ...]
    after: tuple[float, ...]

    @property
    def diff(self) -> np.ndarray:
        return np.array(self.after) - np.array(self.before)

    @property
    def worse(self) -> bool:
        return bool(np.any(self.diff < -STRICT_TOL))

    @property
    def strictly_better(self) -> bool:
        return not self.worse and bool(np.any(self.diff > STRICT_TOL))

    @property
    def status(self) -> str:
        if self.worse:
            return "worse"
        return "better" if self.strictly_better else "equal"


@dataclass(frozen=True)
class SwapVerdict:
    verdict: Verdict
    model: str
    banks: dict[str, BankComparison]
    numeric: bool = False
    functions: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def positive(self) -> bool:
        return self.verdict is Verdict.POSITIVE

    def __str__(self):
        return self.verdict.value

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "model": self.model,
            "numeric": self.numeric,
            "banks": {
                b: {"status": c.status, "points": list(c.points), "before": list(c.before), "after": list(c.after)}
                for b, c in self.banks.items()
            },
        }


def comparison_points(f, g) -> np.ndarray:
    """Union of both breakpoint sets plus the midpoints of the merged partition."""
    if isinstance(f, DiscreteShockFunction):
        return np.arange(min(len(f), len(g)), dtype=float)
    xs = np.union1d(f.xs, g.xs)
    mids = 0.5 * (xs[1:] + xs[:-1])
    return np.union1d(xs, mids)


def compare_functions(bank: str, before, after) -> BankComparison:
    pts = comparison_points(before, after)
    if isinstance(before, DiscreteShockFunction):
        b = [before(int(k)) for k in pts]
        a = [after(int(k)) for k in pts]
    else:
        b = list(map(float, before(pts)))
        a = list(map(float, after(pts)))
    return BankComparison(bank, tuple(float(p) for p in pts), tuple(b), tuple(a))


def verdict_of(comparisons: Sequence[BankComparison]) -> Verdict:
    if any(c.worse for c in comparisons):
        return Verdict.NOT_DOMINANT
    better = [c.strictly_better for c in comparisons]
    if all(better):
        return Verdict.POSITIVE
    if any(better):
        return Verdict.SEMI_POSITIVE
    return Verdict.NEUTRAL


def classify_operation(before: FinancialNetwork, after: FinancialNetwork, acting: Iterable[str],
                       model: ShockModel | str, observe: Iterable[str] = ()) -> SwapVerdict:
    """Verdict for the acting banks; ``observe`` adds non-acting banks to the report only."""
    if isinstance(model, str):
        model = ShockModel.parse(model)
    acting = list(acting)
    comps, funcs, numeric = {}, {}, False
    for b in list(acting) + [o for o in observe if o not in acting]:
        fb, fa = shock_function(before, b, model), shock_function(after, b, model)
        if isinstance(fb, PwlShockFunction) and not (fb.exact and fa.exact):
            numeric = True
        funcs[b] = (fb, fa)
        comps[b] = compare_functions(b, fb, fa)
    verdict = verdict_of([comps[b] for b in acting])
    return SwapVerdict(verdict, str(model), comps, numeric, funcs)


def classify_swap(network: FinancialNetwork, spec: SwapSpec, model: ShockModel | str,
                  observe: Iterable[str] = ()) -> SwapVerdict:
    return classify_operation(network, apply_swap(network, spec), spec.acting, model, observe)


def classify_portfolio_swap(network: FinancialNetwork, spec: PortfolioSwapSpec,
                            model: ShockModel | str, observe: Iterable[str] = ()) -> SwapVerdict:
    return classify_operation(network, apply_portfolio_swap(network, spec), spec.acting, model, observe)


def classify_reorg(network: FinancialNetwork, spec: ReorgSpec, model: ShockModel | str,
                   observe: Iterable[str] = ()) -> SwapVerdict:
    return classify_operation(network, apply_reorg(network, spec), spec.acting, model, observe)


# -- search -------------------------------------------------------------------------

def candidate_swaps(network: FinancialNetwork, pair: tuple[str, str] | None = None) -> list[SwapSpec]:
    """Every valid swap, each unordered pair of contracts listed once.

    With ``pair=(v1, v2)`` only swaps between those two creditors are listed.
    """
    ensure_valid(network)
    cs = sorted(network.contracts, key=lambda c: c.key)
    out = []
    for i, a in enumerate(cs):
        for b in cs[i + 1:]:
            if pair is not None and {a.creditor, b.creditor} != set(pair):
                continue
            if not _same_weight(a.weight, b.weight):
                continue
            spec = SwapSpec(a.key, b.key)
            try:
                check_swap(network, spec)
            except SwapError:
                continue
            out.append(spec.canonical())
    return sorted(set(out), key=lambda s: (s.c1, s.c2))


@dataclass
class SearchResult:
    hits: list[tuple[SwapSpec, SwapVerdict]]
    examined: int
    candidates: int
    truncated: bool = False
    reason: str | None = None

    @property
    def positive(self) -> list[tuple[SwapSpec, SwapVerdict]]:
        return [h for h in self.hits if h[1].verdict is Verdict.POSITIVE]


def search_positive_swaps(network: FinancialNetwork, model: ShockModel | str,
                          pair: tuple[str, str] | None = None,
                          max_candidates: int | None = None) -> SearchResult:
    """Classify every candidate swap; keep the Positive and SemiPositive ones.

    Hits are sorted by verdict (Positive first) and then by contract ids. If a
    shock evaluation exceeds its budget, or ``max_candidates`` is reached, the
    result so far is returned with ``truncated=True``.
    """
    if isinstance(model, str):
        model = ShockModel.parse(model)
    cands = candidate_swaps(network, pair)
    hits, examined = [], 0
    truncated, reason = False, None
    for spec in cands:
        if max_candidates is not None and examined >= max_candidates:
            truncated, reason = True, f"stopped after {max_candidates} candidates"
            break
        try:
            v = classify_swap(network, spec, model)
        except BudgetExceededError as exc:
            truncated, reason = True, str(exc)
            break
        examined += 1
        if v.verdict in (Verdict.POSITIVE, Verdict.SEMI_POSITIVE):
            hits.append((spec, v))
    rank = {Verdict.POSITIVE: 0, Verdict.SEMI_POSITIVE: 1}
    hits.sort(key=lambda h: (rank[h[1].verdict], h[0].c1, h[0].c2))
    return SearchResult(hits, examined, len(cands), truncated, reason)
