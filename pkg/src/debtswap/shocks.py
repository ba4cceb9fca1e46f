"""Shock functions of a single bank under the three shock models.

* proportional: every bank keeps a (1 - lambda) share of its funds; traced
  exactly by following the default regimes, inside which the clearing
  vector is affine in lambda.
* worst-set: the k banks whose wipe-out hurts the target most; exhaustive
  enumeration over funded ancestors of the target.
* worst-sum: a total loss rho spread in the worst way; enumerates the
  configurations with at most one partially hit bank, which is sufficient
  because assets are concave in each bank's funds.

Only ancestors of the target (banks with a debt path into it) can influence
its assets, so every evaluation runs on that sub-network; banks that are
structurally interchangeable are enumerated once per orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels
from .clearing import DEFAULT_MAX_ITER, DEFAULT_TOL, NonConvergenceError, solve
from .network import FinancialNetwork, NetworkError, ShockVector, ensure_valid

DEFAULT_BUDGET = 2 ** 22
TIE_TOL = 1e-9
CHUNK = 8192


class BudgetExceededError(RuntimeError):
    """Enumeration would exceed the configured budget."""


@dataclass(frozen=True)
class DiscreteShockFunction:
    """Worst-set values ``values[k]`` for k = 0..K with witness subsets."""

    bank: str
    values: tuple[float, ...]
    witnesses: tuple[tuple[str, ...], ...] | None = None

    @property
    def K(self) -> int:
        return len(self.values) - 1

    def __call__(self, k: int) -> float:
        return self.values[k]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PwlShockFunction:
    """Piecewise-linear nonincreasing shock function given by its breakpoints.

    ``domain`` is ``"proportional"`` (x = lambda in [0, 1]) or ``"worst_sum"``
    (x = rho in [0, total funds]). ``exact`` is False when the breakpoints
    come from adaptive refinement rather than exact tracing.
    """

    bank: str
    breakpoints: tuple[tuple[float, float], ...]
    domain: str
    exact: bool = True

    @property
    def xs(self) -> np.ndarray:
        return np.array([p[0] for p in self.breakpoints])

    @property
    def ys(self) -> np.ndarray:
        return np.array([p[1] for p in self.breakpoints])

    def __call__(self, x):
        return np.interp(x, self.xs, self.ys)


# -- sub-network restricted to the target's ancestors -----------------------

class _Restricted:
    """Arrays of the ancestor sub-network of ``target``.

    Total liabilities stay those of the full network, so payments leaving
    the ancestor set are still accounted for.
    """

    def __init__(self, network: FinancialNetwork, target: str,
                 tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
        if target not in network.index:
            raise NetworkError(f"unknown bank {target!r}")
        self.network = network
        anc = network.ancestors(target)
        self.ids = [b for b in network.bank_ids if b in anc]
        pos = [network.index[b] for b in self.ids]
        self.local = {b: i for i, b in enumerate(self.ids)}
        self.e = np.ascontiguousarray(network.funds[pos])
        self.L = np.ascontiguousarray(network.liability_matrix[np.ix_(pos, pos)])
        self.l = np.ascontiguousarray(network.total_liabilities[pos])
        self.t = self.local[target]
        self.beta = float(network.beta)
        self.tol = tol
        self.max_iter = max_iter

    def assets(self, E: np.ndarray) -> np.ndarray:
        E = np.ascontiguousarray(np.atleast_2d(E), dtype=np.float64)
        out = _kernels.batch_target_assets(E, self.L, self.l, self.t, self.beta, self.tol, self.max_iter)
        if np.isnan(out).any():
            raise NonConvergenceError("clearing did not converge during shock enumeration", None)
        return out

    def funded(self) -> list[str]:
        return [b for b in self.ids if self.e[self.local[b]] > 0]

    def twin_classes(self, banks: Sequence[str]) -> list[list[str]]:
        """Group banks that an automorphism fixing the target can exchange.

        Two banks are twins when they have equal funds and identical incoming
        and outgoing contracts (which rules out contracts between them).
        """
        net = self.network
        out_sig: dict[str, list] = {b: [] for b in banks}
        in_sig: dict[str, list] = {b: [] for b in banks}
        for c in net.contracts:
            if c.debtor in out_sig:
                out_sig[c.debtor].append((c.creditor, c.weight))
            if c.creditor in in_sig:
                in_sig[c.creditor].append((c.debtor, c.weight))
        groups: dict[tuple, list[str]] = {}
        order = []
        target = self.ids[self.t]
        for b in banks:
            if b == target:
                key = ("target",)
            else:
                key = (net.funds_of(b), tuple(sorted(out_sig[b])), tuple(sorted(in_sig[b])))
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(b)
        return [sorted(groups[k]) for k in order]


def _count_vectors(sizes: Sequence[int], total: int) -> Iterator[tuple[int, ...]]:
    m = len(sizes)
    suffix = [0] * (m + 1)
    for j in range(m - 1, -1, -1):
        suffix[j] = suffix[j + 1] + sizes[j]
    cur = [0] * m

    def rec(j, left):
        if j == m:
            if left == 0:
                yield tuple(cur)
            return
        lo = max(0, left - suffix[j + 1])
        for c in range(lo, min(sizes[j], left) + 1):
            cur[j] = c
            yield from rec(j + 1, left - c)
        cur[j] = 0

    yield from rec(0, total)


def _count_total(sizes: Sequence[int], total: int) -> int:
    ways = [1] + [0] * total
    for s in sizes:
        nxt = [0] * (total + 1)
        for t in range(total + 1):
            if ways[t]:
                for c in range(0, min(s, total - t) + 1):
                    nxt[t + c] += ways[t] * math.comb(s, c)
        ways = nxt
    return ways[total]


def _orbit_count(sizes: Sequence[int], total: int) -> int:
    ways = [1] + [0] * total
    for s in sizes:
        nxt = [0] * (total + 1)
        for t in range(total + 1):
            if ways[t]:
                for c in range(0, min(s, total - t) + 1):
                    nxt[t + c] += ways[t]
        ways = nxt
    return ways[total]


class _Best:
    """Running minimum with lexicographic tie-break on witnesses."""

    def __init__(self):
        self.value = math.inf
        self.witness = None

    def offer(self, values: np.ndarray, witnesses: list):
        lo = float(values.min())
        if lo < self.value - TIE_TOL:
            self.value = lo
            self.witness = None
        elif lo > self.value + TIE_TOL:
            return
        else:
            self.value = min(self.value, lo)
        for i in np.nonzero(values <= self.value + TIE_TOL)[0]:
            w = witnesses[i]
            if self.witness is None or w < self.witness:
                self.witness = w


# -- worst-set ----------------------------------------------------------------

def worst_set_value(network: FinancialNetwork, v: str, k: int,
                    budget: int = DEFAULT_BUDGET, use_symmetry: bool = True):
    """Minimum assets of ``v`` over all ways to wipe out ``k`` banks.

    Returns ``(value, witness)`` where the witness is the lexicographically
    smallest minimizing set (as a sorted tuple of bank ids). Wiping extra
    banks never raises ``a_v``, so only sets of exactly ``min(k, m)`` of the
    ``m`` funded ancestors of ``v`` are enumerated.
    """
    ensure_valid(network)
    if not 0 <= k <= network.n:
        raise NetworkError(f"k must lie in [0, {network.n}], got {k}")
    sub = _Restricted(network, v)
    return _worst_set(sub, k, budget, use_symmetry)


def _worst_set(sub: _Restricted, k: int, budget: int, use_symmetry: bool):
    funded = sub.funded()
    classes = sub.twin_classes(funded) if use_symmetry else [[b] for b in funded]
    sizes = [len(c) for c in classes]
    hits = min(k, len(funded))
    n_cfg = _orbit_count(sizes, hits)
    if n_cfg > budget:
        raise BudgetExceededError(
            f"worst-set enumeration needs {n_cfg} configurations (budget {budget})")
    best = _Best()
    rows, wits = [], []
    cols = [[sub.local[b] for b in cls] for cls in classes]

    def flush():
        E = np.tile(sub.e, (len(rows), 1))
        for i, zero in enumerate(rows):
            E[i, zero] = 0.0
        best.offer(sub.assets(E), wits)
        rows.clear()
        wits.clear()

    for counts in _count_vectors(sizes, hits):
        zero, names = [], []
        for cls, idx, c in zip(classes, cols, counts):
            zero.extend(idx[:c])
            names.extend(cls[:c])
        rows.append(zero)
        wits.append(tuple(sorted(names)))
        if len(rows) >= CHUNK:
            flush()
    if rows:
        flush()
    return best.value, best.witness


def worst_set_function(network: FinancialNetwork, v: str, K: int,
                       budget: int = DEFAULT_BUDGET, use_symmetry: bool = True) -> DiscreteShockFunction:
    """Worst-set shock function of ``v`` for k = 0..K (the limited model)."""
    ensure_valid(network)
    if not 0 <= K <= network.n:
        raise NetworkError(f"K must lie in [0, {network.n}], got {K}")
    sub = _Restricted(network, v)
    values, witnesses = [], []
    for k in range(K + 1):
        val, wit = _worst_set(sub, k, budget, use_symmetry)
        values.append(val)
        witnesses.append(wit)
    return DiscreteShockFunction(v, tuple(values), tuple(witnesses))


# -- worst-sum ----------------------------------------------------------------

def worst_sum_value(network: FinancialNetwork, v: str, rho: float,
                    budget: int = DEFAULT_BUDGET, use_symmetry: bool = True):
    """Minimum assets of ``v`` over all fund losses totalling ``rho``.

    Enumerates every set of fully wiped funded ancestors whose funds fit in
    ``rho``, plus at most one partially hit bank absorbing the remainder.
    Returns ``(value, ShockVector)``.
    """
    ensure_valid(network)
    total = float(network.funds.sum())
    if not -TIE_TOL <= rho <= total * (1 + 1e-12) + TIE_TOL:
        raise NetworkError(f"rho must lie in [0, {total}], got {rho}")
    sub = _Restricted(network, v)
    return _worst_sum(sub, min(max(rho, 0.0), total), budget, use_symmetry)


def _worst_sum(sub: _Restricted, rho: float, budget: int, use_symmetry: bool):
    funded = sub.funded()
    classes = sub.twin_classes(funded) if use_symmetry else [[b] for b in funded]
    cols = [[sub.local[b] for b in cls] for cls in classes]
    funds = [float(sub.e[c[0]]) for c in cols]
    m = len(classes)
    slack = TIE_TOL * max(1.0, rho)
    best = _Best()
    rows, cuts, wits = [], [], []
    seen = [0]

    def emit(counts, partial, rem):
        seen[0] += 1
        if seen[0] > budget:
            raise BudgetExceededError(f"worst-sum enumeration exceeded budget {budget}")
        zero, red = [], {}
        for j, c in enumerate(counts):
            zero.extend(cols[j][:c])
            for b in classes[j][:c]:
                red[b] = funds[j]
        cut = None
        if partial is not None:
            idx = cols[partial][counts[partial]]
            cut = (idx, rem)
            red[classes[partial][counts[partial]]] = rem
        rows.append(zero)
        cuts.append(cut)
        wits.append(tuple(sorted(red.items())))
        if len(rows) >= CHUNK:
            flush()

    def flush():
        E = np.tile(sub.e, (len(rows), 1))
        for i, zero in enumerate(rows):
            E[i, zero] = 0.0
            if cuts[i] is not None:
                idx, rem = cuts[i]
                E[i, idx] = max(E[i, idx] - rem, 0.0)
        best.offer(sub.assets(E), wits)
        rows.clear()
        cuts.clear()
        wits.clear()

    counts = [0] * m

    def rec(j, used):
        if j == m:
            rem = rho - used
            placed = False
            if rem > slack:
                for p in range(m):
                    if counts[p] < len(classes[p]) and funds[p] > rem + slack:
                        emit(counts, p, rem)
                        placed = True
            if not placed:
                emit(counts, None, 0.0)
            return
        for c in range(len(classes[j]) + 1):
            if used + c * funds[j] > rho + slack:
                break
            counts[j] = c
            rec(j + 1, used + c * funds[j])
        counts[j] = 0

    rec(0, 0.0)
    if rows:
        flush()
    return best.value, ShockVector(dict(best.witness))


def worst_sum_function(network: FinancialNetwork, v: str, max_depth: int = 12,
                       chord_tol: float = 1e-9, budget: int = DEFAULT_BUDGET,
                       use_symmetry: bool = True) -> PwlShockFunction:
    """Worst-sum shock function of ``v`` on [0, total funds].

    Evaluated exactly at every subset sum of the funded ancestors' funds,
    then refined between those anchors: an interval whose interior samples
    leave the chord is split at the intersection of its end tangents (or at
    the midpoint), recursively up to ``max_depth``. ``exact`` is True only
    when every anchor interval was linear from the start.
    """
    ensure_valid(network)
    sub = _Restricted(network, v)
    total = float(network.funds.sum())
    funded = sub.funded()
    sums = {0.0}
    for b in funded:
        f = float(sub.e[sub.local[b]])
        sums |= {s + f for s in sums if s + f <= total + TIE_TOL}
        if len(sums) > budget:
            raise BudgetExceededError("too many subset-sum anchors for worst-sum function")
    anchors = sorted({min(s, total) for s in sums} | {total})

    def f(rho):
        return _worst_sum(sub, rho, budget, use_symmetry)[0]

    pts, exact = refine_pwl(f, anchors, chord_tol, max_depth)
    return PwlShockFunction(v, tuple(simplify(pts)), "worst_sum", exact)


# -- proportional ----------------------------------------------------------------

def proportional_shock_function(network: FinancialNetwork, v: str,
                                check_tol: float = 1e-7) -> PwlShockFunction:
    """Exact proportional shock function of ``v`` by default-regime tracing.

    Inside a fixed default set D the recovery rates solve a linear system
    whose right-hand side is affine in lambda, so r(lambda) = A + B*lambda.
    Lambda advances to the next point where a solvent bank's assets meet its
    liabilities; D only grows, so there are at most n + 1 regimes. Every
    breakpoint is checked against a pointwise clearing solve; on a singular
    regime or a failed check the function is rebuilt by adaptive refinement
    and flagged inexact.
    """
    ensure_valid(network)
    sub = _Restricted(network, v)
    if sub.beta != 1.0:
        return _proportional_refined(sub, v)
    traced = _trace_regimes(sub)
    if traced is not None:
        xs = np.array([p[0] for p in traced])
        E = np.outer(1.0 - xs, sub.e)
        direct = sub.assets(E)
        if np.all(np.abs(direct - np.array([p[1] for p in traced])) <= check_tol):
            return PwlShockFunction(v, tuple(simplify(traced)), "proportional", True)
    return _proportional_refined(sub, v)


def _proportional_refined(sub: _Restricted, v: str) -> PwlShockFunction:
    def f(lam):
        return float(sub.assets((1.0 - lam) * sub.e)[0])
    pts, _ = refine_pwl(f, [0.0, 1.0], 1e-10, 20)
    return PwlShockFunction(v, tuple(simplify(pts)), "proportional", False)


def _trace_regimes(sub: _Restricted):
    e, L, l = sub.e, sub.L, sub.l
    n = e.shape[0]
    r0, _, ok = _kernels.fictitious_default(e, L, l)
    if not ok:
        return None
    eps = 1e-10
    default = (r0 < 1.0 - 1e-12) & (l > 0)
    lam = 0.0
    pts = []
    for _ in range(2 * n + 2):
        for _ in range(n + 1):
            regime = _regime(e, L, l, default)
            if regime is None:
                return None
            a0, a1 = regime
            at = a0 + a1 * lam
            edge = (~default) & (l > 0) & (at <= l + eps * np.maximum(l, 1.0)) & (a1 < -eps)
            if not edge.any():
                break
            default = default | edge
        else:
            return None
        if not pts:
            pts.append((0.0, float(a0[sub.t])))
        cand = (~default) & (l > 0) & (a1 < -eps)
        nxt = 1.0
        if cand.any():
            hit = (l[cand] - a0[cand]) / a1[cand]
            hit = hit[hit > lam + 1e-15]
            if hit.size:
                nxt = min(1.0, float(hit.min()))
        pts.append((nxt, float(a0[sub.t] + a1[sub.t] * nxt)))
        if nxt >= 1.0:
            return pts
        lam = nxt
    return None


def _regime(e, L, l, default):
    """Affine assets ``a0 + a1*lambda`` for a fixed default set."""
    idx = np.nonzero(default)[0]
    rest = np.nonzero(~default)[0]
    n = e.shape[0]
    r0 = np.ones(n)
    r1 = np.zeros(n)
    if idx.size:
        M = np.diag(l[idx]) - L[np.ix_(idx, idx)].T
        b0 = e[idx] + L[np.ix_(rest, idx)].sum(axis=0)
        b1 = -e[idx]
        try:
            sol = np.linalg.solve(M, np.column_stack([b0, b1]))
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(sol)) or np.linalg.cond(M) > 1e12:
            return None
        r0[idx] = sol[:, 0]
        r1[idx] = sol[:, 1]
    return e + L.T @ r0, -e + L.T @ r1


# -- piecewise-linear helpers ----------------------------------------------------

def refine_pwl(f: Callable[[float], float], anchors: Sequence[float],
               chord_tol: float = 1e-9, max_depth: int = 12):
    """Recover a piecewise-linear function from point evaluations.

    Returns ``(points, exact)`` where ``exact`` means no anchor interval
    needed splitting.
    """
    cache: dict[float, float] = {}

    def F(x):
        if x not in cache:
            cache[x] = float(f(x))
        return cache[x]

    exact = True

    def linear_on(a, b):
        fa, fb = F(a), F(b)
        scale = chord_tol * max(1.0, abs(fa), abs(fb))
        for t in (0.25, 0.5, 0.75):
            x = a + t * (b - a)
            if abs(F(x) - (fa + t * (fb - fa))) > scale:
                return False
        return True

    def rec(a, b, depth):
        nonlocal exact
        if b - a <= 1e-12 * max(1.0, abs(b)) or linear_on(a, b):
            return [(b, F(b))]
        exact = False
        if depth >= max_depth:
            return [(a + 0.5 * (b - a), F(a + 0.5 * (b - a))), (b, F(b))]
        h = (b - a) * 1e-4
        fa, fb = F(a), F(b)
        sl = (F(a + h) - fa) / h
        sr = (fb - F(b - h)) / h
        c = a + 0.5 * (b - a)
        if abs(sl - sr) > 1e-12:
            cand = (fb - fa + sl * a - sr * b) / (sl - sr)
            if a + h < cand < b - h:
                c = cand
        return rec(a, c, depth + 1) + rec(c, b, depth + 1)

    anchors = sorted(set(float(x) for x in anchors))
    pts = [(anchors[0], F(anchors[0]))]
    for a, b in zip(anchors, anchors[1:]):
        pts.extend(rec(a, b, 0))
    return pts, exact


def simplify(points, tol: float = 1e-9):
    """Drop breakpoints that are collinear with their neighbours."""
    pts = [(float(x), float(y)) for x, y in points]
    dedup = []
    for p in pts:
        if dedup and abs(p[0] - dedup[-1][0]) <= 1e-12 * max(1.0, abs(p[0])):
            continue
        dedup.append(p)
    out = [dedup[0]]
    for i in range(1, len(dedup) - 1):
        (x0, y0), (x1, y1), (x2, y2) = out[-1], dedup[i], dedup[i + 1]
        interp = y0 + (y2 - y0) * (x1 - x0) / (x2 - x0)
        if abs(interp - y1) > tol * max(1.0, abs(y1)):
            out.append(dedup[i])
    if len(dedup) > 1:
        out.append(dedup[-1])
    return out


def shock_value_at(network: FinancialNetwork, v: str, shock: ShockVector) -> float:
    from .network import apply_shock
    return solve(apply_shock(network, shock)).assets[v]
