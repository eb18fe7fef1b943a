"""Large-reserve asymptotics, constant fitting and premium comparisons.

An :class:`AsymptoticForm` is a list of unnormalised terms ``t_i(u)``;
after :func:`fit_constant` it carries constants ``C_i`` such that
``psi(u) ~ sum C_i t_i(u)`` on the fit window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import exact, specfun
from .errors import (BoundaryError, FitError, HypothesisError, SafeLoadError,
                     UnsupportedCaseError)
from .model import (Case, ModelSpec, PremiumClass, PremiumFunction, classify_premium,
                    safe_load_check)
from .odecore import CumulativeIntegral, build_coefficients, constant_roots, stable_log_integrand

MAX_SPREAD = 0.10


@dataclass(frozen=True)
class AsymptoticForm:
    """Unnormalised asymptote ``sum_i C_i t_i(u)``.

    ``terms`` are vectorised callables returning ``log t_i(u)``; logs keep
    the far tail representable.
    """

    case: Case
    premium_class: str
    log_terms: tuple
    labels: tuple
    fitted_constants: tuple | None = None
    fit_window: tuple | None = None
    spread: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_terms(self) -> int:
        return len(self.log_terms)

    @property
    def fitted_constant(self):
        """The constant of the dominant (first listed) term, once fitted."""
        return None if self.fitted_constants is None else self.fitted_constants[0]

    def term(self, i, u):
        return np.exp(self.log_terms[i](np.asarray(u, dtype=float)))

    def envelope(self, u):
        """Sum of the terms with unit constants."""
        return sum(self.term(i, u) for i in range(self.n_terms))

    def __call__(self, u):
        consts = self.fitted_constants or (1.0,) * self.n_terms
        return sum(c * self.term(i, u) for i, c in enumerate(consts) if c != 0.0)


def _log_tail(log_integrand: Callable, scale: float):
    """``u -> log int_u^inf exp(log_integrand)`` computed relative to the value at ``u``."""
    def log_t(u):
        us = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(us)
        for k, a in enumerate(us):
            base = float(np.atleast_1d(log_integrand(np.array([a])))[0])
            f = lambda v, base=base: np.exp(log_integrand(v) - base)
            val = specfun.integrate_to_infinity(f, float(a), tol=1e-300, rel_tol=1e-10,
                                                scale=scale).value
            out[k] = base + math.log(val)
        return out if np.ndim(u) else float(out[0])
    return log_t


def _exp_term(rate):
    return lambda u: rate * np.asarray(u, dtype=float)


def closed_linear_envelope(c, eps, mu, u):
    """``int_u^inf e^{-mu y} ((c + eps y)/c)^{-2} dy`` via the exponential integral."""
    us = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty_like(us)
    for k, a in enumerate(us):
        x = c + eps * a
        z = mu * x / eps
        # e^{mu c/eps} E1(z) e^{-mu u} = e^{-mu u} * e^{z} E1(z) * e^{-z + mu c / eps}
        inner = 1.0 / x - (mu / eps) * specfun.exp1_scaled(z)
        out[k] = c * c / eps * math.exp(-mu * a) * inner
    return out if np.ndim(u) else float(out[0])


def envelope(m: ModelSpec, route: str = "auto") -> AsymptoticForm:
    """Unnormalised large-``u`` form of the ruin probability.

    ``route`` selects, for growing premiums in the Erlang(2) cases, the
    corrected-root integral (``"wkb"``) or the closed linear-premium form
    (``"closed"``). ``"auto"`` uses the closed form for linear premiums.

    Raises
    ------
    HypothesisError
        For Erlang(2) inter-arrival times with a bounded premium that fails
        the net-profit condition (no decaying solution exists).
    """
    if route not in ("auto", "wkb", "closed"):
        raise ValueError("route must be auto, wkb or closed")
    cls = classify_premium(m.premium)
    p = m.premium
    lam, mu = m.lam, m.mu
    if m.case is Case.EXP_EXP:
        phi = CumulativeIntegral(lambda y: lam / np.asarray(p(y), dtype=float), tol=1e-13)
        if cls is PremiumClass.P2:
            log_t = lambda u: -mu * np.asarray(u) + phi(u) - np.log(p(u))
        else:
            log_t = lambda u: -mu * np.asarray(u) + phi(u)
        return AsymptoticForm(m.case, cls.value, (log_t,), ("exponential",))
    if cls is not PremiumClass.P2:
        c = p.limit
        try:
            report = safe_load_check(m)
        except BoundaryError as exc:
            raise HypothesisError(str(exc)) from exc
        r1, r2 = constant_roots(m.case, lam, mu, c)
        if m.case is Case.ERLANG2_EXP:
            if not report.satisfied:
                raise HypothesisError("both local roots are positive: no stable solution")
            return AsymptoticForm(m.case, cls.value,
                                  (lambda u: r1 * np.asarray(u) - math.log(-r1),),
                                  ("exp(rho1 u)",))
        if report.regime == "one-root":
            return AsymptoticForm(m.case, cls.value, (_exp_term(r1),), ("exp(rho1 u)",),
                                  meta={"regime": "one-root"})
        return AsymptoticForm(m.case, cls.value, (_exp_term(r1), _exp_term(r2)),
                              ("exp(rho1 u)", "exp(rho2 u)"), meta={"regime": "two-root"})
    use_closed = route == "closed" or (route == "auto" and p.tag == "linear")
    if use_closed and p.tag != "linear":
        raise UnsupportedCaseError("closed envelope needs a linear premium")
    if m.case is Case.ERLANG2_EXP:
        if use_closed:
            c, eps = p.params
            log_t = lambda u: np.log(closed_linear_envelope(c, eps, mu, u))
            return AsymptoticForm(m.case, cls.value, (log_t,), ("closed",))
        co = build_coefficients(m)
        inner = stable_log_integrand(co, 1)
        return AsymptoticForm(m.case, cls.value, (_log_tail(inner, 1.0 / mu),), ("wkb",))
    if use_closed:
        c, eps = p.params
        k = -0.75 + lam / (2.0 * eps)
        root = math.sqrt(lam * mu * c)

        def integrand(sign):
            def f(y):
                y = np.asarray(y, dtype=float)
                x = c + eps * y
                return (-mu * y + sign * (2.0 / eps) * (np.sqrt(lam * mu * x) - root)
                        + k * np.log(x / c))
            return f

        return AsymptoticForm(m.case, cls.value,
                              (_log_tail(integrand(+1.0), 1.0 / mu),
                               _log_tail(integrand(-1.0), 1.0 / mu)),
                              ("closed slow", "closed fast"))
    co = build_coefficients(m)
    return AsymptoticForm(m.case, cls.value,
                          (_log_tail(stable_log_integrand(co, 2), 1.0 / mu),
                           _log_tail(stable_log_integrand(co, 1), 1.0 / mu)),
                          ("wkb slow", "wkb fast"))


def default_window(reference: "exact.RuinCurve", threshold: float = 1e-4):
    below = np.nonzero(reference.psi < threshold)[0]
    if below.size == 0:
        raise FitError(f"reference never drops below {threshold:g}")
    u1 = float(reference.u[below[0]])
    if u1 <= 0:
        raise FitError("reference is already below the threshold at u = 0")
    return u1, 2.0 * u1


def fit_constant(form: AsymptoticForm, reference: "exact.RuinCurve",
                 window: tuple | None = None, *, max_spread: float = MAX_SPREAD) -> AsymptoticForm:
    """Fit the constants of ``form`` to ``reference`` on ``window``.

    One term: geometric mean of ``reference / envelope``. Several terms:
    least squares in relative error; if the terms cannot be separated
    (design condition number above 1e10) only the dominant term is kept
    and the others get constant 0, recorded as unresolved.

    ``spread = max(ratio) / min(ratio) - 1`` of ``reference / fit``.

    Raises
    ------
    FitError
        When the window holds fewer than two reference points, the
        reference does not extend past the window, or the spread exceeds
        ``max_spread``.
    """
    lo, hi = window if window is not None else default_window(reference)
    if float(np.max(reference.u)) < hi:
        raise FitError(f"reference ends at {np.max(reference.u):g}, before window end {hi:g}")
    sel = (reference.u >= lo) & (reference.u <= hi) & (reference.psi > 0)
    if np.count_nonzero(sel) < 2:
        raise FitError("fewer than two positive reference points in the window")
    u = reference.u[sel]
    ref = reference.psi[sel]
    logs = np.array([np.atleast_1d(form.log_terms[i](u)) for i in range(form.n_terms)])
    meta = dict(form.meta)
    if form.n_terms == 1:
        log_c = float(np.mean(np.log(ref) - logs[0]))
        consts = (math.exp(log_c),)
    else:
        # scale each column by its value at the window start to condition the design
        shift = logs[:, :1]
        design = np.exp(logs - shift).T / ref[:, None]
        cond = np.linalg.cond(design)
        if cond < 1e10:
            coef, *_ = np.linalg.lstsq(design, np.ones_like(ref), rcond=None)
            consts = tuple(float(cf * math.exp(-s)) for cf, s in zip(coef, shift[:, 0]))
            meta["resolved"] = True
        else:
            dom = int(np.argmax(logs[:, -1]))
            log_c = float(np.mean(np.log(ref) - logs[dom]))
            consts = tuple(math.exp(log_c) if i == dom else 0.0 for i in range(form.n_terms))
            meta["resolved"] = False
            meta["unresolved_terms"] = [form.labels[i] for i in range(form.n_terms) if i != dom]
    fitted = replace(form, fitted_constants=consts, fit_window=(lo, hi), meta=meta)
    ratio = ref / fitted(u)
    if np.any(ratio <= 0):
        raise FitError("fitted form changes sign on the window")
    spread = float(np.max(ratio) / np.min(ratio) - 1.0)
    fitted = replace(fitted, spread=spread)
    if spread > max_spread:
        raise FitError(f"ratio varies by {spread:.1%} on [{lo:g}, {hi:g}]: "
                       "asymptotic regime not reached")
    return fitted


def fit_exponentials(u, y, n_terms: int = 2):
    """Prony fit ``y ~ sum a_i exp(r_i u)`` on an equally spaced grid.

    Returns ``(rates, amplitudes)`` sorted by rate (most negative first).
    """
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    du = np.diff(u)
    if not np.allclose(du, du[0], rtol=1e-9):
        raise ValueError("fit_exponentials needs an equally spaced grid")
    n = n_terms
    rows = np.array([y[k:k + n] for k in range(len(y) - n)])
    rhs = -y[n:]
    coef, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    z = np.roots(np.concatenate([[1.0], coef[::-1]]))
    if np.any(np.abs(z.imag) > 1e-10) or np.any(z.real <= 0):
        raise FitError("Prony roots are not positive reals")
    rates = np.sort(np.log(z.real) / du[0])
    basis = np.exp(np.outer(u, rates))
    amps, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return rates, amps


def log_slope(u, psi):
    """Least-squares slope of ``log psi`` against ``u``."""
    u = np.asarray(u, dtype=float)
    return float(np.polyfit(u, np.log(np.asarray(psi, dtype=float)), 1)[0])


@dataclass
class ComparisonTable:
    case: Case
    u: np.ndarray
    psi_linear: np.ndarray
    psi_const: np.ndarray
    ratio: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.u.tolist(), self.psi_linear.tolist(), self.psi_const.tolist(),
                        self.ratio.tolist()))


def compare_linear_vs_constant(case, c: float, eps: float, lam: float, mu: float,
                               u_grid: Sequence[float]) -> ComparisonTable:
    """Ruin probability with premium ``c + eps u`` against premium ``c``.

    When the constant-premium model fails the net-profit condition
    (including the equality case) its ruin probability is one, which is
    what the table then uses.
    """
    case = Case.parse(case)
    u = np.asarray(u_grid, dtype=float)
    meta = {}
    if case is Case.EXP_EXP:
        lin = exact.ruin_exp_exp_linear(c, eps, lam, mu, u)
    elif case is Case.ERLANG2_EXP:
        lin = exact.ruin_erlang2exp_linear(c, eps, lam, mu, u)
    else:
        lin = exact.ruin_experlang2_linear(c, eps, lam, mu, u)
    try:
        _, const = exact.ruin_constant_premium(case, c, lam, mu, u)
    except (SafeLoadError, BoundaryError) as exc:
        const = np.ones_like(u)
        meta["constant_model"] = f"ruin certain ({type(exc).__name__})"
    lin = np.atleast_1d(np.asarray(lin, dtype=float))
    const = np.atleast_1d(np.asarray(const, dtype=float))
    return ComparisonTable(case, u, lin, const, lin / const, meta)
