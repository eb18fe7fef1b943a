"""Closed-form ruin probabilities.

Every evaluator returns ``psi`` for a scalar or array of reserves. The
free amplitudes of the stable solutions are fixed by requiring the
integro-differential equation of the model to hold at ``u = 0`` (and,
for Erlang(2) claims, its first derivative as well, because the claim
density vanishes at zero).
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import specfun
from .errors import (CalibrationError, ConvergenceError, DivergenceError,
                     NonIntegerOrderWarning, SafeLoadError)
from .model import Case, ModelSpec, PremiumFunction, safe_load_check
from .odecore import CumulativeIntegral, constant_roots


@dataclass
class RuinCurve:
    """Ruin probability on a grid of reserves.

    ``err`` holds a per-point absolute error estimate; ``meta`` carries
    calibration constants and solver diagnostics.
    """

    u: np.ndarray
    psi: np.ndarray
    err: np.ndarray
    method: str
    model: ModelSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        self.psi = np.atleast_1d(np.asarray(self.psi, dtype=float))
        self.err = np.broadcast_to(np.asarray(self.err, dtype=float), self.u.shape).copy()
        if self.psi.shape != self.u.shape:
            raise ValueError("u and psi must have the same shape")

    @property
    def points(self):
        return list(zip(self.u.tolist(), self.psi.tolist(), self.err.tolist()))

    def __len__(self):
        return self.u.size


def _shape(u, values):
    return float(values[0]) if np.ndim(u) == 0 else values


# ---------------------------------------------------------------------------
# exponential inter-arrival times, exponential claims
# ---------------------------------------------------------------------------

def ruin_exp_exp_general(p: PremiumFunction, lam: float, mu: float, u, *,
                         tol: float = 1e-13):
    """Ruin probability for Poisson arrivals and exponential claims.

    ``psi(u) = lam I(u) / (1 + lam I(0))`` with
    ``I(u) = int_u^inf exp(-mu v + int_0^v lam/p) / p(v) dv``. Both
    integrals are computed numerically, for any premium.

    Raises
    ------
    DivergenceError
        If the normalising integral does not converge.
    """
    lam = float(lam)
    mu = float(mu)
    phi = CumulativeIntegral(lambda y: lam / np.asarray(p(y), dtype=float), tol=1e-14)

    def g(v):
        v = np.asarray(v, dtype=float)
        return np.exp(-mu * v + phi(v)) / np.asarray(p(v), dtype=float)

    limit = p.limit
    rate = mu - (lam / limit if math.isfinite(limit) else 0.0)
    if rate <= 0:
        raise DivergenceError(f"tail integral diverges: lam/p(inf) = {lam / limit} >= mu")
    scale = 1.0 / rate

    def tail(a):
        try:
            return specfun.integrate_to_infinity(g, a, tol=tol, rel_tol=1e-12, scale=scale)
        except ConvergenceError as exc:
            raise DivergenceError(f"normalising integral failed to converge: {exc}") from exc

    base = tail(0.0)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(us)
    for k, uk in enumerate(us):
        t = base.value if uk == 0.0 else tail(float(uk)).value
        out[k] = lam * t / (1.0 + lam * base.value)
    return _shape(u, out)


def log_ruin_exp_exp_linear(c: float, eps: float, lam: float, mu: float, u):
    """``log psi`` for the linear premium ``c + eps u`` (exp/exp case)."""
    eta = lam / eps
    us = np.atleast_1d(np.asarray(u, dtype=float))
    log_front = math.log(lam) + (eta - 1.0) * math.log(eps)
    log_a = eta * math.log(mu) + eta * math.log(c) - mu * c / eps
    log_b = log_front + specfun.log_upper_incomplete_gamma(mu * c / eps, eta)
    log_den = np.logaddexp(log_a, log_b)
    out = np.array([log_front + specfun.log_upper_incomplete_gamma(mu * (c + eps * x) / eps, eta)
                    for x in us]) - log_den
    return _shape(u, out)


def ruin_exp_exp_linear(c: float, eps: float, lam: float, mu: float, u):
    """Closed form for Poisson arrivals, exponential claims, ``p = c + eps u``.

    Expressed through the upper incomplete gamma function and evaluated in
    log space so that large ``lam / eps`` does not overflow.
    """
    if min(c, eps, lam, mu) <= 0:
        raise ValueError("c, eps, lam, mu must be positive")
    return np.exp(log_ruin_exp_exp_linear(c, eps, lam, mu, u))


# ---------------------------------------------------------------------------
# constant premium, all cases
# ---------------------------------------------------------------------------

def experlang2_amplitudes(lam, c, s1, s2):
    """Amplitudes of ``C1 e^{s1 u} + C2 e^{s2 u}`` for Erlang(2) claims."""
    mat = np.array([[lam - c * s1, lam - c * s2],
                    [s1 * (lam - c * s1), s2 * (lam - c * s2)]])
    return np.linalg.solve(mat, np.array([lam, 0.0]))


def ruin_constant_premium(case, c: float, lam: float, mu: float, u):
    """Ruin probability under a constant premium rate ``c``.

    Returns
    -------
    (rates, psi)
        ``rates`` are the positive decay rates of the exponential terms.

    Raises
    ------
    SafeLoadError
        When the net-profit condition fails.
    """
    case = Case.parse(case)
    m = ModelSpec(case, lam, mu, PremiumFunction.constant(c))
    if not safe_load_check(m).satisfied:
        raise SafeLoadError(f"net-profit condition fails for {m.describe()}")
    us = np.asarray(u, dtype=float)
    if case is Case.EXP_EXP:
        rate = mu - lam / c
        return [rate], (lam / (c * mu)) * np.exp(-rate * us)
    if case is Case.ERLANG2_EXP:
        rate = (c * mu - 2 * lam + math.sqrt(c * c * mu * mu + 4 * c * lam * mu)) / (2 * c)
        amp = lam * lam / (lam + c * rate) ** 2
        return [rate], amp * np.exp(-rate * us)
    s1, s2 = constant_roots(case, lam, mu, c)
    c3, c4 = experlang2_amplitudes(lam, c, s1, s2)
    return [-s1, -s2], c3 * np.exp(s1 * us) + c4 * np.exp(s2 * us)


def constant_premium_amplitudes(case, c, lam, mu):
    """Amplitudes paired with the rates returned by :func:`ruin_constant_premium`."""
    case = Case.parse(case)
    rates, _ = ruin_constant_premium(case, c, lam, mu, 0.0)
    if case is Case.EXP_EXP:
        return [lam / (c * mu)]
    if case is Case.ERLANG2_EXP:
        return [lam * lam / (lam + c * rates[0]) ** 2]
    return list(experlang2_amplitudes(lam, c, -rates[0], -rates[1]))


# ---------------------------------------------------------------------------
# calibration helpers shared with the boundary-value solver
# ---------------------------------------------------------------------------

def calibrate_erlang2exp(lam, p0, dp0, tail0, logslope0):
    """Amplitude of ``psi = A S`` for Erlang(2) inter-arrival times.

    ``S(u) = int_u^inf h`` with ``h(0) = 1`` and ``logslope0 = h'(0)/h(0)``.
    The condition is that the integro-differential equation holds at zero,
    ``lam^2 psi - 2 lam p psi' + p p' psi' + p^2 psi'' = lam^2``.
    """
    den = lam * lam * tail0 + 2.0 * lam * p0 - p0 * dp0 - p0 * p0 * logslope0
    if not den > 0:
        raise CalibrationError(f"non-positive normalisation denominator {den:.6g}")
    amp = lam * lam / den
    if not 0 < amp * tail0 <= 1.0 + 1e-9:
        raise CalibrationError(f"calibrated psi(0) = {amp * tail0:.6g} outside (0, 1]")
    return amp


def calibrate_experlang2(lam, p0, dp0, tails0, logslopes0):
    """Weights of ``psi = sum g_i S_i`` for Erlang(2) claims.

    Each ``S_i = int_u^inf h_i`` with ``h_i(0) = 1``. Two conditions:
    ``lam psi(0) - p psi'(0) = lam`` and ``(lam - p') psi'(0) = p psi''(0)``.
    With a single branch only the first condition is used and the second
    is returned as a residual in ``meta``.
    """
    tails0 = np.atleast_1d(np.asarray(tails0, dtype=float))
    w = np.atleast_1d(np.asarray(logslopes0, dtype=float))
    row1 = lam * tails0 + p0
    row2 = p0 * w - (lam - dp0)
    if tails0.size == 1:
        g = np.array([lam / row1[0]])
        return g, float(row2[0] * g[0])
    mat = np.vstack([row1, row2])
    cond = np.linalg.cond(mat)
    if not cond < 1e12:
        raise CalibrationError(f"calibration system ill-conditioned (cond={cond:.3g})")
    g = np.linalg.solve(mat, np.array([lam, 0.0]))
    return g, 0.0


def _tail_integrals(log_h, us, scale, rel_tol=1e-11):
    """``int_u^inf exp(log_h)`` for every ``u`` in ``us`` (sorted internally).

    Adjacent grid points share work: the last tail is integrated to
    infinity and each earlier one adds a finite piece.
    """
    us = np.asarray(us, dtype=float)
    order = np.argsort(us)
    srt = us[order]
    f = lambda v: np.exp(log_h(v))
    vals = np.empty_like(srt)
    errs = np.empty_like(srt)
    last = specfun.integrate_to_infinity(f, float(srt[-1]), tol=1e-300, rel_tol=rel_tol,
                                         scale=scale)
    vals[-1], errs[-1] = last.value, last.abs_error_estimate
    for k in range(srt.size - 2, -1, -1):
        a, b = float(srt[k]), float(srt[k + 1])
        if a == b:
            vals[k], errs[k] = vals[k + 1], errs[k + 1]
            continue
        piece = specfun.integrate(f, a, b, tol=1e-300, rel_tol=rel_tol)
        vals[k] = vals[k + 1] + piece.value
        errs[k] = errs[k + 1] + piece.abs_error_estimate
    out_v = np.empty_like(vals)
    out_e = np.empty_like(errs)
    out_v[order] = vals
    out_e[order] = errs
    return out_v, out_e


# ---------------------------------------------------------------------------
# Erlang(2) inter-arrival times, exponential claims, linear premium
# ---------------------------------------------------------------------------

def kummer_parameters(c, eps, lam, mu, *, published=False):
    """``(a, b, k)`` of the stable solution ``e^{-mu u} x^k U(a, b, mu x / eps)``.

    ``x = c + eps u``. The default is the solution of the correctly
    expanded ODE; ``published=True`` gives the historical parameters.
    """
    big_l = lam / eps
    if published:
        root = math.sqrt(1.0 + 4.0 * big_l)
        return 1.0 + (1.0 + 2.0 * big_l + root) / 2.0, 1.0 + root, -0.5 + big_l + 0.5 * root
    return 1.0 + big_l, 1.0, big_l - 1.0


class _KummerBranch:
    """``log h`` and ``h'/h`` for the confluent stable solution, ``h(0) = 1``."""

    def __init__(self, c, eps, lam, mu, published):
        self.c, self.eps, self.mu = c, eps, mu
        self.a, self.b, self.k = kummer_parameters(c, eps, lam, mu, published=published)
        self.m = mu / eps
        self._log0 = self._raw(0.0)

    @lru_cache(maxsize=65536)
    def _raw(self, v):
        x = self.c + self.eps * v
        return -self.mu * v + self.k * math.log(x) + specfun.log_kummer_u(self.a, self.b, self.m * x)

    def log_h(self, v):
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.array([self._raw(float(t)) for t in arr]) - self._log0
        return out if np.ndim(v) else float(out[0])

    def log_slope(self, v):
        x = self.c + self.eps * v
        z = self.m * x
        ratio = math.exp(specfun.log_kummer_u(self.a + 1, self.b + 1, z)
                         - specfun.log_kummer_u(self.a, self.b, z))
        return -self.mu + self.k * self.eps / x - self.a * self.mu * ratio


def ruin_erlang2exp_linear(c: float, eps: float, lam: float, mu: float, u, *,
                           published: bool = False, return_curve: bool = False):
    """Erlang(2) inter-arrival times, exponential claims, ``p = c + eps u``.

    ``psi(u) = A int_u^inf e^{-mu v} x^k U(a, b, mu x / eps) dv`` with
    ``x = c + eps v``; see :func:`kummer_parameters`. ``A`` is calibrated
    from the integro-differential equation at zero.
    """
    if min(c, eps, lam, mu) <= 0:
        raise ValueError("c, eps, lam, mu must be positive")
    br = _KummerBranch(c, eps, lam, mu, published)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    grid = np.union1d(us, [0.0])
    tails, errs = _tail_integrals(br.log_h, grid, scale=1.0 / mu)
    tail0 = tails[0]
    amp = calibrate_erlang2exp(lam, c, eps, tail0, br.log_slope(0.0))
    idx = np.searchsorted(grid, us)
    psi = amp * tails[idx]
    err = amp * errs[idx] + psi * errs[0] / tail0
    if return_curve:
        m = ModelSpec(Case.ERLANG2_EXP, lam, mu, PremiumFunction.linear(c, eps))
        return RuinCurve(us, psi, err, "exact", m,
                         {"amplitude": amp, "kummer": (br.a, br.b, br.k),
                          "published": published})
    return _shape(u, psi)


# ---------------------------------------------------------------------------
# exponential inter-arrival times, Erlang(2) claims, linear premium
# ---------------------------------------------------------------------------

class _BesselBranch:
    """``e^{-mu x/eps} x^{n/2} Z_nu(2 sqrt(lam mu x) / eps)`` with ``h(0) = 1``."""

    def __init__(self, kind, c, eps, lam, mu):
        self.kind = kind
        self.c, self.eps, self.mu = c, eps, mu
        self.n = lam / eps - 1.0
        self.nu = abs(self.n)
        self.scale = lam * mu / (eps * eps)
        self._log0 = self._raw(0.0)

    def _zeta(self, v):
        return 2.0 * math.sqrt(self.scale * (self.c + self.eps * v))

    def _log_z(self, nu, zeta):
        if self.kind == "I":
            return specfun.log_bessel_i(nu, zeta)
        return specfun.log_bessel_k(nu, zeta)

    @lru_cache(maxsize=65536)
    def _raw(self, v):
        x = self.c + self.eps * v
        return (-self.mu * v + 0.5 * self.n * math.log(x)
                + self._log_z(self.nu, self._zeta(v)))

    def log_h(self, v):
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        out = np.array([self._raw(float(t)) for t in arr]) - self._log0
        return out if np.ndim(v) else float(out[0])

    def log_slope(self, v):
        x = self.c + self.eps * v
        zeta = self._zeta(v)
        ratio = math.exp(self._log_z(self.nu + 1, zeta) - self._log_z(self.nu, zeta))
        dz = ratio + self.nu / zeta if self.kind == "I" else -ratio + self.nu / zeta
        return -self.mu + 0.5 * self.n * self.eps / x + dz * self.eps * zeta / (2.0 * x)


def ruin_experlang2_linear(c: float, eps: float, lam: float, mu: float, u, *,
                           branches=("I", "K"), return_curve: bool = False):
    """Poisson arrivals, Erlang(2) claims, ``p = c + eps u``.

    Both Bessel branches decay, so ``psi`` is a combination of the two
    tail integrals ``int_u^inf e^{-mu v} x^{n/2} Z_nu(zeta) dv``
    (``Z = I, K``; ``n = lam/eps - 1``; ``zeta = 2 sqrt(lam mu x)/eps``)
    with weights from the two boundary conditions at zero. Passing
    ``branches=("K",)`` keeps only the K branch and fits one condition.

    Warns
    -----
    NonIntegerOrderWarning
        When ``n`` is not a non-negative integer. The solution is still a
        solution of the ODE for real order.
    """
    if min(c, eps, lam, mu) <= 0:
        raise ValueError("c, eps, lam, mu must be positive")
    n = lam / eps - 1.0
    if not (n >= 0 and abs(n - round(n)) < 1e-12):
        warnings.warn(f"Bessel order {n:g} is not a non-negative integer; using real order",
                      NonIntegerOrderWarning, stacklevel=2)
    brs = [_BesselBranch(kind, c, eps, lam, mu) for kind in branches]
    us = np.atleast_1d(np.asarray(u, dtype=float))
    grid = np.union1d(us, [0.0])
    tails, errs = zip(*(_tail_integrals(b.log_h, grid, scale=1.0 / mu) for b in brs))
    tails0 = [t[0] for t in tails]
    weights, resid = calibrate_experlang2(lam, c, eps, tails0,
                                          [b.log_slope(0.0) for b in brs])
    idx = np.searchsorted(grid, us)
    psi = sum(w * t[idx] for w, t in zip(weights, tails))
    err = sum(abs(w) * e[idx] for w, e in zip(weights, errs))
    if not (np.all(psi > -1e-12) and psi[0] <= 1.0 + 1e-9):
        raise CalibrationError("calibrated curve leaves [0, 1]")
    if return_curve:
        m = ModelSpec(Case.EXP_ERLANG2, lam, mu, PremiumFunction.linear(c, eps))
        return RuinCurve(us, psi, err, "exact", m,
                         {"weights": dict(zip(branches, weights.tolist())),
                          "order": n, "derivative_residual": resid})
    return _shape(u, psi)
