"""Ruin probabilities for renewal risk models with surplus-dependent premiums."""
__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403,E402
from .model import (Case, ModelSpec, PremiumClass, PremiumFunction, SafeLoadReport,  # noqa: E402
                    classify_premium, parse_premium, safe_load_check, safe_load_margin)
from .exact import (RuinCurve, ruin_constant_premium, ruin_erlang2exp_linear,  # noqa: E402
                    ruin_exp_exp_general, ruin_exp_exp_linear, ruin_experlang2_linear)
from .bvp import BvpConfig, solve_ruin, stable_solution  # noqa: E402
from .montecarlo import SimulationResult, simulate_curve, simulate_ruin  # noqa: E402
from .analysis import (AsymptoticForm, compare_linear_vs_constant, envelope,  # noqa: E402
                       fit_constant)
