"""Second-order ODEs for the density ``h = -psi'`` and their local roots.

For the Erlang(2) cases the ruin probability solves a third-order linear
ODE whose only non-decaying solution is the constant. Writing it for
``h = psi'`` gives ``h'' + q1(u) h' + q0(u) h = 0``. This module builds
``q1, q0`` (and their derivatives), the pointwise characteristic roots
``rho^2 + q1 rho + q0 = 0``, the first-order corrections
``rho^(1) = -rho' / (2 rho + q1)`` and the resulting stable integrands.
"""
from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import specfun
from .errors import ComplexRootsError, DegenerateRootError, UnsupportedCaseError
from .model import Case, ModelSpec, PremiumFunction

DEGENERATE_TOL = 1e-12


def _premium_derivs(p: PremiumFunction, u, order):
    return [np.asarray(p.derivative(u, k), dtype=float) for k in range(order + 1)]


@dataclass(frozen=True)
class OdeCoefficients:
    """Coefficients of ``h'' + q1 h' + q0 h = 0``.

    ``published`` switches the Erlang(2)-interarrival case to the
    historical expansion with ``2p'/p`` in ``q1`` and without the ``p'^2``,
    ``p p''`` and ``mu p'`` terms in ``q0``. It agrees with the default
    for constant premiums and is kept only for comparison.
    """

    model: ModelSpec
    published: bool = False

    @property
    def case(self) -> Case:
        return self.model.case

    @property
    def analytic_derivatives(self) -> bool:
        return self.model.premium.builtin

    def _terms(self, u, order):
        m = self.model
        lam, mu = m.lam, m.mu
        need = 3 if (order and m.premium.builtin) else 2
        d = _premium_derivs(m.premium, u, need)
        return lam, mu, d

    def q1(self, u):
        lam, mu, d = self._terms(u, 0)
        p, p1 = d[0], d[1]
        if self.case is Case.ERLANG2_EXP:
            k = 2.0 if self.published else 3.0
            out = k * p1 / p - 2.0 * lam / p + mu
        else:
            out = 2.0 * p1 / p + 2.0 * mu - lam / p
        return _out(u, out)

    def q0(self, u):
        lam, mu, d = self._terms(u, 0)
        p, p1 = d[0], d[1]
        if self.case is Case.ERLANG2_EXP:
            if self.published:
                out = (lam * lam - 2.0 * lam * p1) / p ** 2 - 2.0 * lam * mu / p
            else:
                p2 = d[2]
                out = ((lam * lam - 2.0 * lam * p1 + p1 * p1 + p * p2) / p ** 2
                       + mu * (p1 - 2.0 * lam) / p)
        else:
            p2 = d[2]
            out = p2 / p + 2.0 * mu * p1 / p + mu * mu - 2.0 * mu * lam / p
        return _out(u, out)

    def dq1(self, u):
        """Analytic ``q1'``; built-in premiums only."""
        self._require_analytic()
        lam, mu, d = self._terms(u, 1)
        p, p1, p2 = d[0], d[1], d[2]
        if self.case is Case.ERLANG2_EXP:
            k = 2.0 if self.published else 3.0
            out = k * (p2 * p - p1 * p1) / p ** 2 + 2.0 * lam * p1 / p ** 2
        else:
            out = 2.0 * (p2 * p - p1 * p1) / p ** 2 + lam * p1 / p ** 2
        return _out(u, out)

    def dq0(self, u):
        """Analytic ``q0'``; built-in premiums only."""
        self._require_analytic()
        lam, mu, d = self._terms(u, 1)
        p, p1, p2, p3 = d[0], d[1], d[2], d[3]
        if self.case is Case.ERLANG2_EXP:
            if self.published:
                out = (-2.0 * lam * p2 / p ** 2
                       - 2.0 * (lam * lam - 2.0 * lam * p1) * p1 / p ** 3
                       + 2.0 * lam * mu * p1 / p ** 2)
            else:
                a = lam * lam - 2.0 * lam * p1 + p1 * p1 + p * p2
                da = -2.0 * lam * p2 + 3.0 * p1 * p2 + p * p3
                out = (da / p ** 2 - 2.0 * a * p1 / p ** 3
                       + mu * (p2 / p - (p1 - 2.0 * lam) * p1 / p ** 2))
        else:
            out = ((p3 * p - p2 * p1) / p ** 2 + 2.0 * mu * (p2 * p - p1 * p1) / p ** 2
                   + 2.0 * mu * lam * p1 / p ** 2)
        return _out(u, out)

    def _require_analytic(self):
        if not self.analytic_derivatives:
            raise UnsupportedCaseError("analytic coefficient derivatives need a built-in premium")


def _out(u, arr):
    return float(arr) if np.ndim(u) == 0 else arr


def build_coefficients(m: ModelSpec, *, published: bool = False) -> OdeCoefficients:
    """ODE coefficients for the Erlang(2) cases.

    Raises
    ------
    UnsupportedCaseError
        For the exponential/exponential case, which reduces to first order.
    """
    if m.case is Case.EXP_EXP:
        raise UnsupportedCaseError("the exp/exp case has a first-order closed form; use exact")
    return OdeCoefficients(m, published)


def quadratic_roots(q1, q0):
    """Real roots ``(r1, r2)``, ``r1 <= r2``, of ``r^2 + q1 r + q0``.

    Uses the cancellation-free form: the larger-magnitude root from the
    quadratic formula and the other from the product ``q0``.
    """
    q1 = np.asarray(q1, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    disc = q1 * q1 - 4.0 * q0
    if np.any(disc < 0):
        bad = float(np.min(disc))
        raise ComplexRootsError(f"negative discriminant {bad:.6g}: roots are complex")
    sq = np.sqrt(disc)
    big = np.where(q1 >= 0, -0.5 * (q1 + sq), 0.5 * (sq - q1))
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big != 0, q0 / big, 0.0)
    r1 = np.minimum(big, small)
    r2 = np.maximum(big, small)
    if r1.ndim == 0:
        return float(r1), float(r2)
    return r1, r2


def char_roots(coeffs: OdeCoefficients, u):
    """Characteristic roots ``(rho1, rho2)`` at reserve ``u``, ``rho1 <= rho2``."""
    return quadratic_roots(coeffs.q1(u), coeffs.q0(u))


def constant_roots(case, lam: float, mu: float, c: float):
    """Roots for a constant premium ``c`` (the hat / tilde roots)."""
    m = ModelSpec(case, lam, mu, PremiumFunction.constant(c))
    co = build_coefficients(m)
    return char_roots(co, 0.0)


def _root_and_derivative(coeffs, index, u):
    roots = char_roots(coeffs, u)
    rho = np.asarray(roots[index - 1], dtype=float)
    denom = 2.0 * rho + np.asarray(coeffs.q1(u), dtype=float)
    if np.any(np.abs(denom) < DEGENERATE_TOL):
        raise DegenerateRootError("double characteristic root: 2 rho + q1 vanishes")
    if coeffs.analytic_derivatives:
        drho = -(np.asarray(coeffs.dq1(u)) * rho + np.asarray(coeffs.dq0(u))) / denom
    else:
        u_arr = np.asarray(u, dtype=float)
        h = np.maximum(1e-6 * u_arr, 1e-8)
        lo = np.maximum(u_arr - h, 0.0)
        hi = u_arr + h
        r_hi = np.asarray(char_roots(coeffs, hi)[index - 1])
        r_lo = np.asarray(char_roots(coeffs, lo)[index - 1])
        drho = (r_hi - r_lo) / (hi - lo)
    return rho, drho, denom


def root_derivative(coeffs: OdeCoefficients, root_index: int, u):
    """``rho_i'(u)``; analytic for built-in premiums, central differences otherwise."""
    _, drho, _ = _root_and_derivative(coeffs, root_index, u)
    return _out(u, drho)


def root_correction(coeffs: OdeCoefficients, root_index: int, u):
    """First-order correction ``rho_i^(1)(u) = -rho_i'(u) / (2 rho_i(u) + q1(u))``."""
    if root_index not in (1, 2):
        raise ValueError("root_index must be 1 or 2")
    _, drho, denom = _root_and_derivative(coeffs, root_index, u)
    return _out(u, -drho / denom)


def corrected_root(coeffs: OdeCoefficients, root_index: int, u):
    """``rho_i(u) + rho_i^(1)(u)``, the local log-derivative of the stable solution."""
    rho, drho, denom = _root_and_derivative(coeffs, root_index, u)
    return _out(u, rho - drho / denom)


@dataclass(frozen=True)
class CharRoots:
    """Bundle of the root functions for one set of coefficients."""

    coeffs: OdeCoefficients

    def rho1(self, u):
        return char_roots(self.coeffs, u)[0]

    def rho2(self, u):
        return char_roots(self.coeffs, u)[1]

    def rho1_corr(self, u):
        return root_correction(self.coeffs, 1, u)

    def rho2_corr(self, u):
        return root_correction(self.coeffs, 2, u)

    @property
    def constant_level(self):
        """Roots at the limiting premium level, or ``None`` when it is infinite."""
        m = self.coeffs.model
        c = m.premium.limit
        if not math.isfinite(c):
            return None
        return constant_roots(m.case, m.lam, m.mu, c)


class CumulativeIntegral:
    """``G(y) = int_0^y g(t) dt`` with cached breakpoints.

    Queries are answered by integrating from the nearest cached point
    below, so a sweep over increasing ``y`` costs one short integral per
    query. The cache is guarded by a lock; readers always see a prefix of
    consistent breakpoints.
    """

    def __init__(self, g: Callable, tol: float = 1e-12, origin: float = 0.0):
        self.g = g
        self.tol = tol
        self._xs = [float(origin)]
        self._vs = [0.0]
        self._lock = threading.Lock()
        self.max_cached = 200_000

    def _segment(self, a, b):
        return specfun.integrate(self.g, a, b, tol=self.tol, rel_tol=1e-13).value

    def _single(self, y):
        with self._lock:
            xs, vs = self._xs, self._vs
            k = bisect.bisect_right(xs, y) - 1
            if k < 0:
                # below the origin: integrate backwards, do not cache
                return vs[0] - self._segment(y, xs[0])
            if xs[k] == y:
                return vs[k]
            val = vs[k] + self._segment(xs[k], y)
            if len(xs) < self.max_cached:
                xs.insert(k + 1, y)
                vs.insert(k + 1, val)
            return val

    def __call__(self, y):
        arr = np.asarray(y, dtype=float)
        if arr.ndim == 0:
            return self._single(float(arr))
        flat = arr.ravel()
        order = np.argsort(flat, kind="stable")
        out = np.empty_like(flat)
        for idx in order:
            out[idx] = self._single(float(flat[idx]))
        return out.reshape(arr.shape)


def stable_log_integrand(coeffs: OdeCoefficients, root_index: int = 1,
                         tol: float = 1e-12) -> Callable:
    """``y -> int_0^y (rho_i + rho_i^(1))``; the log of :func:`stable_integrand`."""
    def g(t):
        return np.asarray(corrected_root(coeffs, root_index, t), dtype=float)

    return CumulativeIntegral(g, tol=tol)


def stable_integrand(coeffs: OdeCoefficients, root_index: int = 1,
                     tol: float = 1e-12) -> Callable:
    """``y -> exp(int_0^y (rho_i(z) + rho_i^(1)(z)) dz)``.

    The inner integral is accumulated with a cache, so evaluating the
    integrand on an increasing set of points is linear in their number.
    """
    log_f = stable_log_integrand(coeffs, root_index, tol)

    def f(y):
        return np.exp(log_f(y))

    f.log = log_f
    return f
