"""Clearing, shock functions and debt swaps in financial networks."""

from .clearing import (ClearingSolution, NonConvergenceError, solve, solve_fictitious_default,
                       solve_picard, solve_with_default_costs)
from .gadgets import Fixture, GadgetHandle, d_boolean, densest_k_reduction, one_fix, paper_fixture
from .network import (Bank, Contract, FinancialNetwork, NetworkError, ShockVector, apply_shock,
                      open_variant, proportional_shock, validate)
from .shocks import (BudgetExceededError, DiscreteShockFunction, PwlShockFunction,
                     proportional_shock_function, worst_set_function, worst_set_value,
                     worst_sum_function, worst_sum_value)
from .swaps import (PortfolioSwapSpec, ReorgSpec, ShockModel, SwapError, SwapSpec, SwapVerdict, Verdict,
                    apply_portfolio_swap, apply_reorg, apply_swap, classify_operation,
                    candidate_swaps, classify_portfolio_swap, classify_reorg, classify_swap,
                    search_positive_swaps)
from .tree_dp import NotATreeError, is_tree, tree_worst_set

__version__ = "0.1.0"
