"""Monte Carlo estimation of finite-horizon ruin probabilities.

Every path ``i`` draws its randomness from Philox blocks keyed by the
seed with counter ``(claim index, 0, i_lo, i_hi)``; the estimate is a sum
of per-chunk integer counts, so it is identical for any number of worker
threads. Paths whose surplus climbs past an escape level, from which ruin
has probability below ``exp(-40)``, are stopped early as survivors.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .. import exact
from ..errors import DomainError, StiffnessError
from ..model import Case, ModelSpec, PremiumFunction, safe_load_margin
from . import _kernel_py

try:
    if os.environ.get("SURPLUS_RUIN_BACKEND", "").lower() == "python":
        raise ImportError("compiled kernel disabled by environment")
    from ._kernel import run_paths as _compiled_run_paths
except ImportError:
    _compiled_run_paths = None

BACKENDS = ("compiled", "python")
DEFAULT_BACKEND = "compiled" if _compiled_run_paths is not None else "python"
CHUNK = 1 << 14
ESCAPE_LOG = 40.0
LATE_FRACTION = 1e-3
MAX_EXTENSIONS = 4

_CODES = {"constant": _kernel_py.CONSTANT, "linear": _kernel_py.LINEAR,
          "polynomial": _kernel_py.POLYNOMIAL, "bounded_p1": _kernel_py.RATIONAL}


@dataclass(frozen=True)
class SimulationResult:
    """Finite-horizon Monte Carlo estimate of the ruin probability at ``u``."""

    u: float
    psi_hat: float
    half_width_95: float
    n_paths: int
    horizon: float
    ruined_paths: int
    late_ruined_paths: int
    truncation_flag: bool
    seed: int
    backend: str

    @property
    def ci(self):
        return self.psi_hat - self.half_width_95, self.psi_hat + self.half_width_95


def flow_map(p: PremiumFunction, u: float, t: float, *, numeric: bool = False) -> float:
    """Surplus after time ``t`` without claims, solving ``du/dt = p(u)``.

    Exact for constant and linear premiums; otherwise (or with
    ``numeric=True``) an adaptive DOP853 integration at relative
    tolerance 1e-11.
    """
    if t < 0:
        raise DomainError("flow time must be non-negative")
    if not numeric and p.tag == "constant":
        return u + p.params[0] * t
    if not numeric and p.tag == "linear":
        c, eps = p.params
        return u * math.exp(eps * t) + (c / eps) * math.expm1(eps * t)
    if t == 0:
        return float(u)
    sol = solve_ivp(lambda s, y: [float(p(y[0]))], (0.0, t), [float(u)], method="DOP853",
                    rtol=1e-11, atol=1e-13 * max(1.0, abs(u)))
    if not sol.success:
        raise StiffnessError(f"flow integration failed: {sol.message}")
    return float(sol.y[0, -1])


def _floor_above(p: PremiumFunction, level: float):
    """``min_{v >= level} p(v)`` for built-in premiums, else ``None``."""
    if p.tag == "constant":
        return p.params[0]
    if p.tag in ("linear", "polynomial"):
        return float(p(level))
    if p.tag == "bounded_p1":
        return min(float(p(level)), p.params[0])
    return None


def escape_level(m: ModelSpec) -> float:
    """Surplus level above which ruin has probability below ``exp(-40)``.

    Above a level ``L`` the premium is at least ``c1 = min_{v>=L} p``, so
    by coupling the chance of falling back below ``L`` from ``L + y`` is at
    most the constant-premium ruin probability at ``y``, itself bounded
    by ``exp(-R y)`` with ``R`` the smallest decay rate.
    """
    best = math.inf
    for level in [0.0] + [2.0 ** k for k in range(21)]:
        c1 = _floor_above(m.premium, level)
        if c1 is None:
            return math.inf
        if safe_load_margin(m.case, m.lam, m.mu, c1) <= 1e-9:
            continue
        rates, _ = exact.ruin_constant_premium(m.case, c1, m.lam, m.mu, 0.0)
        best = min(best, level + ESCAPE_LOG / min(rates))
    return best


def default_horizon(m: ModelSpec) -> float:
    return 100.0 / m.lam


def _kernel_args(m: ModelSpec):
    code = _CODES.get(m.premium.tag, _kernel_py.CUSTOM)
    params = np.array(m.premium.params if code != _kernel_py.CUSTOM else [0.0], dtype=float)
    return (int(m.case is Case.ERLANG2_EXP), int(m.case is Case.EXP_ERLANG2),
            m.lam, m.mu, code, params)


def _count(m, u, horizon, n_paths, seed, workers, backend, u_escape):
    arr, clm, lam, mu, code, params = _kernel_args(m)
    if backend == "compiled" and code != _kernel_py.CUSTOM:
        fn = _compiled_run_paths
    else:
        fn = _kernel_py.run_paths
    chunks = [(s, min(s + CHUNK, n_paths)) for s in range(0, n_paths, CHUNK)]

    def job(bounds):
        return fn(arr, clm, lam, mu, code, params, float(u), float(horizon), float(u_escape),
                  seed, bounds[0], bounds[1], m.premium)

    if workers <= 1 or len(chunks) == 1:
        counts = [job(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(job, chunks))
    return sum(c[0] for c in counts), sum(c[1] for c in counts)


def simulate_ruin(m: ModelSpec, u: float, horizon: float | None = None,
                  n_paths: int = 100_000, seed: int = 0, *, workers: int = 1,
                  backend: str | None = None) -> SimulationResult:
    """Estimate ``P(ruin before horizon)`` from initial surplus ``u``.

    Without an explicit ``horizon`` the run starts at ``100 / lam`` and
    the horizon is doubled (up to four times) while the late-ruin
    diagnostic fires: more than 0.1% of ruins in the second half of the
    horizon.
    """
    n_paths = int(n_paths)
    if n_paths < 1:
        raise DomainError("n_paths must be at least 1")
    if horizon is not None and not horizon > 0:
        raise DomainError("horizon must be positive")
    if not u >= 0:
        raise DomainError("initial surplus must be non-negative")
    backend = backend or DEFAULT_BACKEND
    if backend not in BACKENDS:
        raise DomainError(f"unknown backend {backend!r}")
    if backend == "compiled" and _compiled_run_paths is None:
        raise DomainError("compiled kernel not available")
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise DomainError("seed must be in [0, 2**64)")
    u_escape = escape_level(m)
    auto = horizon is None
    h = default_horizon(m) if auto else float(horizon)
    for attempt in range(MAX_EXTENSIONS + 1):
        ruined, late = _count(m, u, h, n_paths, seed, workers, backend, u_escape)
        flag = late > LATE_FRACTION * ruined
        if not (auto and flag) or attempt == MAX_EXTENSIONS:
            break
        h *= 2.0
    psi = ruined / n_paths
    hw = 1.96 * math.sqrt(psi * (1.0 - psi) / n_paths)
    return SimulationResult(float(u), psi, hw, n_paths, h, ruined, late, flag, seed, backend)


def simulate_curve(m: ModelSpec, u_grid, horizon=None, n_paths=100_000, seed=0, **kw):
    """Run :func:`simulate_ruin` at every reserve; common random numbers across ``u``."""
    return [simulate_ruin(m, float(u), horizon, n_paths, seed, **kw) for u in u_grid]


def as_curve(m: ModelSpec, results) -> "exact.RuinCurve":
    u = [r.u for r in results]
    return exact.RuinCurve(u, [r.psi_hat for r in results], [r.half_width_95 for r in results],
                           "mc", m, {"n_paths": [r.n_paths for r in results],
                                     "horizon": [r.horizon for r in results]})
