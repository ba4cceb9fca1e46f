"""Maximal clearing vectors.

Two independent routes reach the same equilibrium: Picard iteration of the
clearing map from full repayment downward, and the fictitious default
algorithm which guesses the default set and solves a linear system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .network import FinancialNetwork, NetworkError, ensure_valid

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100_000


class NonConvergenceError(RuntimeError):
    """Picard iteration ran out of iterations; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: "ClearingSolution"):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True)
class ClearingSolution:
    recovery: dict[str, float]
    payments: dict[tuple[str, str], float]
    assets: dict[str, float]
    equity: dict[str, float]
    defaulting: frozenset[str]
    residual: float
    method: str = "picard"
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Plain structure for JSON output (payments keyed ``"u->v"``)."""
        return {
            "recovery": dict(self.recovery),
            "assets": dict(self.assets),
            "equity": dict(self.equity),
            "payments": {f"{u}->{v}": p for (u, v), p in self.payments.items()},
            "defaulting": sorted(self.defaulting),
            "residual": self.residual,
            "method": self.method,
            "metadata": dict(self.metadata),
        }


def _arrays(network: FinancialNetwork):
    return (np.ascontiguousarray(network.funds, dtype=np.float64),
            np.ascontiguousarray(network.liability_matrix, dtype=np.float64),
            np.ascontiguousarray(network.total_liabilities, dtype=np.float64))


def _package(network: FinancialNetwork, r: np.ndarray, beta: float, method: str,
             metadata: dict) -> ClearingSolution:
    e, L, l = _arrays(network)
    a = e + L.T @ r
    residual = float(_kernels.fixed_point_residual(e, L, l, r, beta))
    ids = network.bank_ids
    payments = {c.key: float(r[network.index[c.debtor]] * c.weight) for c in network.contracts}
    return ClearingSolution(
        recovery={b: float(r[i]) for i, b in enumerate(ids)},
        payments=payments,
        assets={b: float(a[i]) for i, b in enumerate(ids)},
        equity={b: float(max(a[i] - l[i], 0.0)) for i, b in enumerate(ids)},
        defaulting=frozenset(b for i, b in enumerate(ids) if r[i] < 1.0),
        residual=residual,
        method=method,
        metadata=metadata,
    )


def _picard(network: FinancialNetwork, beta: float, tol: float, max_iter: int, method: str):
    if tol <= 0:
        raise ValueError("tol must be positive")
    ensure_valid(network)
    e, L, l = _arrays(network)
    r, iters, step, converged = _kernels.picard(e, L, l, float(beta), float(tol), int(max_iter))
    sol = _package(network, r, beta, method, {"iterations": int(iters), "last_step": float(step)})
    if not converged:
        raise NonConvergenceError(
            f"Picard iteration did not converge in {max_iter} iterations (last step {step:.3g})", sol)
    return sol


def solve_picard(network: FinancialNetwork, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER) -> ClearingSolution:
    """Greatest clearing vector by iterating the clearing map from r = 1."""
    return _picard(network, 1.0, tol, max_iter, "picard")


def solve_with_default_costs(network: FinancialNetwork, beta: float | None = None,
                             tol: float = DEFAULT_TOL,
                             max_iter: int = DEFAULT_MAX_ITER) -> ClearingSolution:
    """Clearing with default costs: a defaulting bank distributes only ``beta * a_u``.

    Uses Picard iteration from r = 1; ``beta`` defaults to the network's own
    ``default_cost_beta`` (or 1). With beta = 1 this is exactly ``solve_picard``.
    """
    if beta is None:
        beta = network.beta
    if not 0 < beta <= 1:
        raise NetworkError(f"beta must lie in (0, 1], got {beta}")
    return _picard(network, float(beta), tol, max_iter, "picard" if beta == 1 else "picard-default-cost")


def solve_fictitious_default(network: FinancialNetwork, tol: float = DEFAULT_TOL) -> ClearingSolution:
    """Greatest clearing vector by the fictitious default algorithm.

    Falls back to Picard iteration (flagged in ``metadata["fallback"]``) when
    a default-set system is singular or the result fails the fixed-point check.
    """
    ensure_valid(network)
    e, L, l = _arrays(network)
    r, rounds, ok = _kernels.fictitious_default(e, L, l)
    if not ok:
        sol = solve_picard(network, tol)
        return ClearingSolution(sol.recovery, sol.payments, sol.assets, sol.equity, sol.defaulting,
                                sol.residual, "fictitious-default",
                                {**sol.metadata, "fallback": "picard", "rounds": int(rounds)})
    return _package(network, r, 1.0, "fictitious-default", {"rounds": int(rounds), "fallback": None})


def solve(network: FinancialNetwork, tol: float = DEFAULT_TOL) -> ClearingSolution:
    """Default solver: honours ``network.default_cost_beta``."""
    if network.beta != 1.0:
        return solve_with_default_costs(network, network.beta, tol)
    return solve_fictitious_default(network, tol)


def assets_of(network: FinancialNetwork, bank: str) -> float:
    return solve(network).assets[bank]
