"""Numerical boundary-value solution of the ruin ODE for general premiums.

The density ``h = -psi'`` solves ``h'' + q1 h' + q0 h = 0``. It spans many
orders of magnitude, so we integrate the log-derivative ``w = h'/h``
(a Riccati equation) together with ``ln h`` and ``sigma = S / h`` where
``S(u) = int_u^inf h``. Then ``psi = A h sigma`` with ``A`` fixed by the
integro-differential equation at zero.

* Erlang(2) inter-arrival times: a single decaying solution. It is found
  by integrating backwards from ``u_max``, seeded on the decaying local
  root, which damps the growing solution.
* Erlang(2) claims: both solutions decay when the net-profit condition
  holds, and ``psi`` is the combination with ``h'(0)/h(0) = (lam - p'(0))/p(0)``.
  That solution is integrated forwards from zero (forward integration of
  two decaying modes is stable), then ``sigma`` backwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (CalibrationError, DomainError, SafeLoadError, StiffnessError,
                     TruncationError, UnsupportedCaseError)
from .exact import RuinCurve, calibrate_erlang2exp, ruin_exp_exp_general
from .model import Case, ModelSpec, PremiumClass, classify_premium, safe_load_check
from .odecore import build_coefficients, char_roots, constant_roots, corrected_root

TAIL_MODES = ("asymptotic_seed", "zero_seed")
MAX_DOUBLINGS = 6


@dataclass(frozen=True)
class BvpConfig:
    """Solver settings.

    ``u_max=None`` picks the truncation point from the decay rate so the
    neglected mass is below ``tol`` and grows it if needed. ``grid`` and
    ``n_points`` define the output grid when none is passed to
    :func:`solve_ruin`.
    """

    u_max: float | None = None
    grid: str = "uniform"
    n_points: int = 101
    tol: float = 1e-10
    tail_mode: str = "asymptotic_seed"
    rtol: float = 1e-11
    published: bool = False

    def __post_init__(self):
        if self.u_max is not None and not self.u_max > 0:
            raise DomainError("u_max must be positive")
        if not self.tol > 0:
            raise DomainError("tol must be positive")
        if self.tail_mode not in TAIL_MODES:
            raise DomainError(f"tail_mode must be one of {TAIL_MODES}")
        if self.grid not in ("uniform", "geometric"):
            raise DomainError("grid must be 'uniform' or 'geometric'")


def output_grid(cfg: BvpConfig, u_max: float) -> np.ndarray:
    if cfg.grid == "uniform":
        return np.linspace(0.0, u_max, cfg.n_points)
    return np.concatenate([[0.0], np.geomspace(u_max * 1e-4, u_max, cfg.n_points - 1)])


def _decay_rate(m: ModelSpec, co) -> float:
    """Slowest tail decay rate, used to place ``u_max``."""
    level = m.premium.limit
    if math.isfinite(level):
        roots = [r for r in constant_roots(m.case, m.lam, m.mu, level) if r < 0]
        return -max(roots)
    probe = 20.0 / m.mu
    if m.case is Case.ERLANG2_EXP:
        return -corrected_root(co, 1, probe)
    return -corrected_root(co, 2, probe)


def _ivp(fun, span, y0, rtol, dense=True):
    sol = solve_ivp(fun, span, y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3,
                    dense_output=dense)
    if not sol.success:
        raise StiffnessError(f"integration over {span} failed: {sol.message}")
    return sol


def _check_applicable(m: ModelSpec):
    if m.case is Case.EXP_EXP:
        return
    cls = classify_premium(m.premium)
    if cls is not PremiumClass.P2 and not safe_load_check(m).satisfied:
        raise SafeLoadError(f"net-profit condition fails for {m.describe()}; ruin is certain")


def _backward(co, u_max, rtol, tail_mode, root_index=1):
    """Backward sweep from ``u_max``; returns the dense solution of (ln h, w, sigma)."""
    if tail_mode == "asymptotic_seed":
        w_seed = corrected_root(co, root_index, u_max)
        sig_seed = -1.0 / w_seed
    else:
        w_seed = char_roots(co, u_max)[root_index - 1]
        sig_seed = 0.0
    if not w_seed < 0:
        raise TruncationError(f"no decaying direction at u_max={u_max:g} (w={w_seed:g})")

    def rhs(u, y):
        q1, q0 = co.q1(u), co.q0(u)
        return [y[1], -y[1] * (y[1] + q1) - q0, -1.0 - y[1] * y[2]]

    return _ivp(rhs, (u_max, 0.0), [0.0, w_seed, sig_seed], rtol), w_seed, sig_seed


def _forward(co, w0, u_max, rtol, tail_mode):
    """Forward sweep for (ln h, w) then backward sweep for sigma."""
    def rhs(u, y):
        q1, q0 = co.q1(u), co.q0(u)
        return [y[1], -y[1] * (y[1] + q1) - q0]

    fwd = _ivp(rhs, (0.0, u_max), [0.0, w0], rtol)
    w_end = fwd.y[1, -1]
    if not w_end < 0:
        raise TruncationError(f"forward solution does not decay at u_max={u_max:g}")
    sig_seed = -1.0 / w_end if tail_mode == "asymptotic_seed" else 0.0
    bwd = _ivp(lambda u, y: [-1.0 - fwd.sol(u)[1] * y[0]], (u_max, 0.0), [sig_seed], rtol)

    class _Joined:
        def sol(self, u):
            a = fwd.sol(u)
            b = bwd.sol(u)
            if np.ndim(u) == 0:
                return np.array([a[0], a[1], b[0]])
            return np.vstack([a[0], a[1], b[0]])

    return _Joined(), w_end, sig_seed


def _shape(m, co, u_max, rtol, tail_mode, forward, root_index=1):
    if forward:
        p0, dp0 = float(m.premium(0.0)), float(m.premium.d1(0.0))
        return _forward(co, (m.lam - dp0) / p0, u_max, rtol, tail_mode)
    return _backward(co, u_max, rtol, tail_mode, root_index)


def _psi_from_shape(m, sol, us, u_max):
    y0 = sol.sol(0.0)
    lnh0, w0, sig0 = float(y0[0]), float(y0[1]), float(y0[2])
    if not (sig0 > 0 and math.isfinite(sig0)):
        raise CalibrationError(f"tail integral at zero is {sig0!r}")
    p0, dp0 = float(m.premium(0.0)), float(m.premium.d1(0.0))
    if m.case is Case.ERLANG2_EXP:
        amp = calibrate_erlang2exp(m.lam, p0, dp0, sig0, w0)
    else:
        amp = m.lam / (m.lam * sig0 + p0)
    ys = sol.sol(np.clip(us, 0.0, u_max))
    lnh = ys[0] - lnh0
    sig = ys[2]
    if np.any(sig <= 0) or not np.all(np.isfinite(lnh)):
        raise StiffnessError("density changed sign or overflowed: psi not monotone")
    psi = amp * np.exp(lnh) * sig
    end = sol.sol(u_max)
    psi_end = amp * math.exp(end[0] - lnh0) * end[2]
    return psi, amp, psi_end


def _solve_once(m, co, us, u_max, cfg, rtol, forward):
    sol, w_seed, _ = _shape(m, co, u_max, rtol, cfg.tail_mode, forward)
    psi, amp, psi_end = _psi_from_shape(m, sol, us, u_max)
    return psi, amp, psi_end, w_seed


def solve_ruin(m: ModelSpec, cfg: BvpConfig | None = None, u=None) -> RuinCurve:
    """Ruin probability on ``u`` (or on the config's grid) by shooting.

    Raises
    ------
    SafeLoadError
        For a bounded premium that violates the net-profit condition.
    TruncationError
        If ``psi(u_max)`` exceeds ``tol`` and ``u_max`` was fixed by the
        caller (or could not be grown enough).
    StiffnessError
        If the integrator fails or the density changes sign.
    """
    cfg = cfg or BvpConfig()
    _check_applicable(m)
    if m.case is Case.EXP_EXP:
        grid = np.asarray(u if u is not None else output_grid(cfg, cfg.u_max or 20.0 / m.mu))
        psi = np.atleast_1d(ruin_exp_exp_general(m.premium, m.lam, m.mu, grid))
        return RuinCurve(grid, psi, np.full(psi.shape, 1e-12), "bvp", m,
                         {"delegated": "exact quadrature"})
    co = build_coefficients(m, published=cfg.published)
    forward = m.case is Case.EXP_ERLANG2
    auto = cfg.u_max is None
    if auto:
        u_max = math.log(100.0 / cfg.tol) / _decay_rate(m, co)
        if u is not None and len(np.atleast_1d(u)):
            u_max = max(u_max, 1.2 * float(np.max(u)))
    else:
        u_max = float(cfg.u_max)
    for _ in range(MAX_DOUBLINGS + 1):
        us = np.atleast_1d(np.asarray(u if u is not None else output_grid(cfg, u_max),
                                      dtype=float))
        if np.any(us < 0):
            raise DomainError("reserves must be non-negative")
        psi, amp, psi_end, w_seed = _solve_once(m, co, us, u_max, cfg, cfg.rtol, forward)
        if psi_end <= cfg.tol:
            break
        if not auto:
            raise TruncationError(f"psi(u_max={u_max:g}) = {psi_end:.3g} exceeds tol {cfg.tol:g}")
        u_max *= 2.0
    else:
        raise TruncationError(f"psi(u_max={u_max:g}) = {psi_end:.3g} still above tol")
    coarse, _, _, _ = _solve_once(m, co, us, u_max, cfg, cfg.rtol * 1e3, forward)
    tail = psi_end if cfg.tail_mode == "zero_seed" else psi_end * 0.1
    err = np.abs(psi - coarse) + tail
    beyond = us > u_max
    psi = np.where(beyond, 0.0, psi)
    err = np.where(beyond, psi_end, err)
    return RuinCurve(us, psi, err, "bvp", m,
                     {"amplitude": amp, "u_max": u_max, "psi_u_max": psi_end,
                      "tail_mode": cfg.tail_mode, "direction": "forward" if forward else "backward",
                      "published": cfg.published})


def stable_solution(m: ModelSpec, u, *, u_max: float | None = None, rtol: float = 1e-11,
                    root_index: int = 1) -> RuinCurve:
    """Shape ``S(u)/S(0)`` of the decaying solution attached to one root.

    Backward shooting seeded on root ``root_index``; no net-profit check and
    no calibration, so it also works where the ruin probability itself is
    trivially one. Useful for studying tail exponents.
    """
    if m.case is Case.EXP_EXP:
        raise UnsupportedCaseError("stable_solution needs an Erlang(2) case")
    co = build_coefficients(m)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if u_max is None:
        u_max = 1.5 * float(np.max(us)) + 10.0
    sol, _, _ = _backward(co, u_max, rtol, "asymptotic_seed", root_index)
    y0 = sol.sol(0.0)
    ys = sol.sol(us)
    shape = np.exp(ys[0] - y0[0]) * ys[2] / y0[2]
    return RuinCurve(us, shape, np.zeros_like(us), "bvp", m,
                     {"normalised": "S(0) = 1", "root_index": root_index, "u_max": u_max})
