"""Monte Carlo simulation of the surplus process."""
from .simulate import (BACKENDS, DEFAULT_BACKEND, SimulationResult, as_curve, escape_level,
                       flow_map, simulate_curve, simulate_ruin)

__all__ = ["BACKENDS", "DEFAULT_BACKEND", "SimulationResult", "as_curve", "escape_level",
           "flow_map", "simulate_curve", "simulate_ruin"]
