"""Financial network data model: banks, debt contracts, shocks and file I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class NetworkError(ValueError):
    """Raised for malformed networks, files, shocks or transformations."""


@dataclass(frozen=True)
class Bank:
    id: str
    funds: float


@dataclass(frozen=True)
class Contract:
    debtor: str
    creditor: str
    weight: float

    @property
    def key(self) -> tuple[str, str]:
        return (self.debtor, self.creditor)


def parse_number(value) -> float:
    """Parse a number or a ``"p/q"`` rational string into a float."""
    if isinstance(value, bool):
        raise NetworkError(f"not a number: {value!r}")
    if isinstance(value, (int, float, Fraction)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise NetworkError(f"not a number: {value!r}") from exc
    raise NetworkError(f"not a number: {value!r}")


@dataclass(frozen=True)
class FinancialNetwork:
    """Banks with external funds connected by weighted debt contracts.

    Instances are immutable; every transformation returns a new network.
    ``default_cost_beta`` of ``None`` means the plain model (beta = 1).
    """

    banks: tuple[Bank, ...]
    contracts: tuple[Contract, ...] = ()
    default_cost_beta: float | None = None

    @classmethod
    def build(cls, funds: Mapping[str, float] | Iterable[tuple[str, float]],
              contracts: Iterable = (), default_cost_beta: float | None = None,
              merge: bool = True) -> "FinancialNetwork":
        """Convenience constructor.

        ``funds`` maps bank id to funds (insertion order is bank order);
        ``contracts`` holds ``(debtor, creditor, weight)`` triples. Numbers
        may be rational strings. Parallel contracts are summed when ``merge``.
        """
        items = funds.items() if isinstance(funds, Mapping) else funds
        banks = tuple(Bank(str(b), parse_number(e)) for b, e in items)
        cons = []
        for c in contracts:
            if isinstance(c, Contract):
                cons.append(c)
            else:
                d, cr, w = c
                cons.append(Contract(str(d), str(cr), parse_number(w)))
        if merge:
            cons = merge_parallel(cons)
        return cls(banks, tuple(cons), default_cost_beta)

    # -- index helpers -------------------------------------------------
    @cached_property
    def bank_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.banks)

    @cached_property
    def index(self) -> dict[str, int]:
        return {b: i for i, b in enumerate(self.bank_ids)}

    @property
    def n(self) -> int:
        return len(self.banks)

    @cached_property
    def funds(self) -> np.ndarray:
        arr = np.array([b.funds for b in self.banks], dtype=np.float64)
        arr.flags.writeable = False
        return arr

    @cached_property
    def liability_matrix(self) -> np.ndarray:
        """Dense ``L[u, v] = l_{u,v}``."""
        L = np.zeros((self.n, self.n))
        for c in self.contracts:
            L[self.index[c.debtor], self.index[c.creditor]] += c.weight
        L.flags.writeable = False
        return L

    @cached_property
    def total_liabilities(self) -> np.ndarray:
        arr = self.liability_matrix.sum(axis=1)
        arr.flags.writeable = False
        return arr

    @cached_property
    def contract_map(self) -> dict[tuple[str, str], float]:
        return {c.key: c.weight for c in self.contracts}

    def funds_of(self, bank: str) -> float:
        return self.banks[self.index[bank]].funds

    def liability(self, debtor: str, creditor: str) -> float:
        return self.contract_map.get((debtor, creditor), 0.0)

    def incoming(self, bank: str) -> list[Contract]:
        return [c for c in self.contracts if c.creditor == bank]

    def outgoing(self, bank: str) -> list[Contract]:
        return [c for c in self.contracts if c.debtor == bank]

    @property
    def beta(self) -> float:
        return 1.0 if self.default_cost_beta is None else self.default_cost_beta

    # -- structure -----------------------------------------------------
    def ancestors(self, bank: str) -> set[str]:
        """Banks with a directed debt path to ``bank``, including itself."""
        preds: dict[str, list[str]] = {}
        for c in self.contracts:
            preds.setdefault(c.creditor, []).append(c.debtor)
        seen = {bank}
        stack = [bank]
        while stack:
            for p in preds.get(stack.pop(), ()):
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def with_funds(self, funds: Mapping[str, float]) -> "FinancialNetwork":
        banks = tuple(Bank(b.id, float(funds.get(b.id, b.funds))) for b in self.banks)
        return FinancialNetwork(banks, self.contracts, self.default_cost_beta)

    def with_contracts(self, contracts: Iterable[Contract]) -> "FinancialNetwork":
        return FinancialNetwork(self.banks, tuple(contracts), self.default_cost_beta)

    def with_beta(self, beta: float | None) -> "FinancialNetwork":
        return FinancialNetwork(self.banks, self.contracts, beta)

    def structurally_equal(self, other: "FinancialNetwork", rel_tol: float = 1e-12) -> bool:
        """Equality up to contract ordering and float round-trip."""
        if self.bank_ids != other.bank_ids or self.default_cost_beta != other.default_cost_beta:
            return False
        if not all(math.isclose(a.funds, b.funds, rel_tol=rel_tol, abs_tol=1e-300)
                   for a, b in zip(self.banks, other.banks)):
            return False
        mine, theirs = self.contract_map, other.contract_map
        if mine.keys() != theirs.keys():
            return False
        return all(math.isclose(w, theirs[k], rel_tol=rel_tol) for k, w in mine.items())


@dataclass(frozen=True)
class ShockVector:
    """Per-bank removal of external funds."""

    reductions: Mapping[str, float] = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.reductions.values()))


def merge_parallel(contracts: Iterable[Contract]) -> list[Contract]:
    """Sum contracts sharing a (debtor, creditor) pair, keeping first-seen order."""
    merged: dict[tuple[str, str], float] = {}
    for c in contracts:
        merged[c.key] = merged.get(c.key, 0.0) + c.weight
    return [Contract(d, cr, w) for (d, cr), w in merged.items()]


def validate(network: FinancialNetwork) -> list[str]:
    """Return a list of invariant violations; empty means the network is valid."""
    problems = []
    seen: set[str] = set()
    for b in network.banks:
        if b.id in seen:
            problems.append(f"duplicate bank id {b.id!r}")
        seen.add(b.id)
        if not (b.funds >= 0) or not math.isfinite(b.funds):
            problems.append(f"bank {b.id!r}: funds must be finite and >= 0, got {b.funds}")
    pairs: set[tuple[str, str]] = set()
    for c in network.contracts:
        where = f"contract {c.debtor}->{c.creditor}"
        if c.debtor == c.creditor:
            problems.append(f"{where}: self-loop")
        for end in (c.debtor, c.creditor):
            if end not in seen:
                problems.append(f"{where}: unknown bank {end!r}")
        if not (c.weight > 0) or not math.isfinite(c.weight):
            problems.append(f"{where}: weight must be finite and > 0, got {c.weight}")
        if c.key in pairs:
            problems.append(f"{where}: parallel contract (merge before use)")
        pairs.add(c.key)
    beta = network.default_cost_beta
    if beta is not None and not (0 < beta <= 1):
        problems.append(f"default_cost_beta must lie in (0, 1], got {beta}")
    return problems


def ensure_valid(network: FinancialNetwork) -> FinancialNetwork:
    problems = validate(network)
    if problems:
        raise NetworkError("; ".join(problems))
    return network


def apply_shock(network: FinancialNetwork, shock: ShockVector | Mapping[str, float]) -> FinancialNetwork:
    """Return a copy of ``network`` with funds reduced per ``shock``."""
    reductions = shock.reductions if isinstance(shock, ShockVector) else shock
    new = {}
    for bank, cut in reductions.items():
        if bank not in network.index:
            raise NetworkError(f"shock names unknown bank {bank!r}")
        funds = network.funds_of(bank)
        cut = float(cut)
        if cut < 0 or cut > funds * (1 + 1e-12) + 1e-15:
            raise NetworkError(f"shock on {bank!r} must lie in [0, {funds}], got {cut}")
        new[bank] = max(funds - cut, 0.0)
    return network.with_funds(new)


def proportional_shock(network: FinancialNetwork, lam: float) -> ShockVector:
    """Shock removing a ``lam`` fraction of every bank's funds."""
    if not 0 <= lam <= 1:
        raise NetworkError(f"lambda must lie in [0, 1], got {lam}")
    return ShockVector({b.id: lam * b.funds for b in network.banks})


def big_liability(network: FinancialNetwork) -> float:
    """Finite stand-in for an infinite liability.

    No bank can ever pay more than all funds plus all circulating debt.
    """
    return float(sum(b.funds for b in network.banks) + sum(c.weight for c in network.contracts) + 1.0)


def open_variant(network: FinancialNetwork, c1: tuple[str, str], c2: tuple[str, str],
                 names: tuple[str, str, str, str] = ("s1", "s2", "t1", "t2")):
    """Break the two contracts ``c1``, ``c2`` into sources and sinks.

    Returns ``(open_network, s1, s2, t1, t2)``: ``s_i`` is a new zero-funds
    source owing a huge amount to the creditor of ``c_i``; ``t_i`` is a new
    sink receiving the debtor's former obligation on ``c_i``.
    """
    (u1, v1), (u2, v2) = c1, c2
    if len({u1, v1, u2, v2}) != 4:
        raise NetworkError("open variant needs four distinct endpoints")
    for c in (c1, c2):
        if c not in network.contract_map:
            raise NetworkError(f"no contract {c[0]}->{c[1]}")
    taken = set(network.bank_ids)
    s1, s2, t1, t2 = (_fresh(name, taken) for name in names)
    big = big_liability(network)
    keep = [c for c in network.contracts if c.key not in (c1, c2)]
    keep += [Contract(s1, v1, big), Contract(s2, v2, big),
             Contract(u1, t1, network.contract_map[c1]),
             Contract(u2, t2, network.contract_map[c2])]
    banks = network.banks + tuple(Bank(x, 0.0) for x in (s1, s2, t1, t2))
    return FinancialNetwork(banks, tuple(keep), network.default_cost_beta), s1, s2, t1, t2


def _fresh(name: str, taken: set[str]) -> str:
    out, i = name, 0
    while out in taken:
        i += 1
        out = f"{name}_{i}"
    taken.add(out)
    return out


# -- serialization -----------------------------------------------------

_TOP_KEYS = {"banks", "contracts", "default_cost_beta"}


def from_dict(data) -> FinancialNetwork:
    if not isinstance(data, dict):
        raise NetworkError("network document must be an object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise NetworkError(f"unknown keys: {sorted(extra)}")
    if "banks" not in data:
        raise NetworkError("missing 'banks'")
    banks = []
    ids: set[str] = set()
    for entry in data["banks"]:
        if not isinstance(entry, dict) or set(entry) - {"id", "funds"} or "id" not in entry:
            raise NetworkError(f"malformed bank entry: {entry!r}")
        bid = str(entry["id"])
        if bid in ids:
            raise NetworkError(f"duplicate bank id {bid!r}")
        ids.add(bid)
        banks.append(Bank(bid, parse_number(entry.get("funds", 0))))
    contracts = []
    for entry in data.get("contracts", []):
        if not isinstance(entry, dict) or set(entry) != {"debtor", "creditor", "weight"}:
            raise NetworkError(f"malformed contract entry: {entry!r}")
        d, cr = str(entry["debtor"]), str(entry["creditor"])
        for end in (d, cr):
            if end not in ids:
                raise NetworkError(f"contract {d}->{cr} names unknown bank {end!r}")
        contracts.append(Contract(d, cr, parse_number(entry["weight"])))
    beta = data.get("default_cost_beta")
    net = FinancialNetwork(tuple(banks), tuple(merge_parallel(contracts)),
                           None if beta is None else parse_number(beta))
    return ensure_valid(net)


def to_dict(network: FinancialNetwork) -> dict:
    out = {
        "banks": [{"id": b.id, "funds": b.funds} for b in network.banks],
        "contracts": [{"debtor": c.debtor, "creditor": c.creditor, "weight": c.weight}
                      for c in network.contracts],
    }
    if network.default_cost_beta is not None:
        out["default_cost_beta"] = network.default_cost_beta
    return out


def loads(text: str) -> FinancialNetwork:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkError(f"malformed network file: {exc}") from exc
    return from_dict(data)


def dumps(network: FinancialNetwork) -> str:
    return json.dumps(to_dict(network), indent=2) + "\n"


def load(path) -> FinancialNetwork:
    return loads(Path(path).read_text(encoding="utf-8"))


def save(network: FinancialNetwork, path) -> None:
    Path(path).write_text(dumps(network), encoding="utf-8")
