"""Model configuration: premium functions, model cases, classification.

A model is fixed by the case (which of interarrival time and claim size
is Erlang(2)), the two rates and a premium rate ``p(u)`` that depends on
the current surplus ``u``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BoundaryError, ClassificationError, DomainError

BOUNDARY_TOL = 1e-12
PROBE_GRID = tuple(10.0 ** k for k in range(7))


class Case(str, enum.Enum):
    """Model case: interarrival distribution / claim distribution."""

    EXP_EXP = "exp-exp"
    ERLANG2_EXP = "erlang2-exp"
    EXP_ERLANG2 = "exp-erlang2"

    @classmethod
    def parse(cls, text) -> "Case":
        if isinstance(text, Case):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"expexp": "exp-exp", "erlang2exp": "erlang2-exp",
                   "experlang2": "exp-erlang2"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise DomainError(f"unknown model case {text!r}") from None


class PremiumClass(str, enum.Enum):
    CONSTANT = "constant"
    P1 = "P1"
    P2 = "P2"


_TAGS = ("constant", "linear", "polynomial", "bounded_p1", "custom_p1", "custom_p2")


def _as_array(u):
    return np.asarray(u, dtype=float)


def _apply(fn, u):
    arr = _as_array(u)
    out = fn(arr)
    out = np.asarray(out, dtype=float)
    if out.shape != arr.shape:
        out = np.broadcast_to(out, arr.shape).astype(float) if out.ndim == 0 else \
            np.vectorize(lambda x: float(fn(x)), otypes=[float])(arr)
    return out


def _scalar_or_array(u, values):
    if np.ndim(u) == 0:
        return float(values)
    return values


@dataclass(frozen=True)
class PremiumFunction:
    """Premium rate ``p(u) > 0`` with derivative access.

    Build instances with :meth:`constant`, :meth:`linear`,
    :meth:`polynomial`, :meth:`rational` or :meth:`custom`. Built-in tags
    carry their coefficients in ``params`` and have analytic derivatives
    of every order; custom premiums must provide ``p'`` and ``p''``.
    """

    tag: str
    params: tuple = ()
    fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    d1_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    d2_fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    limit_value: Optional[float] = None

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise DomainError(f"unknown premium tag {self.tag!r}")
        if self.tag.startswith("custom"):
            if self.fn is None or self.d1_fn is None or self.d2_fn is None:
                raise DomainError("custom premiums need p, p' and p'' callables")
            p0 = float(_apply(self.fn, 0.0))
            if not p0 > 0:
                raise DomainError(f"premium must be positive, p(0) = {p0}")
            return
        if any(not math.isfinite(x) for x in self.params):
            raise DomainError("premium coefficients must be finite")
        c = self.params[0]
        if not c > 0:
            raise DomainError(f"premium level c must be positive, got {c}")
        if self.tag in ("linear", "polynomial"):
            if len(self.params) < 2 or any(not e > 0 for e in self.params[1:]):
                raise DomainError("growth coefficients must all be positive")
            if self.tag == "linear" and len(self.params) != 2:
                raise DomainError("linear premium takes (c, eps)")
        if self.tag == "bounded_p1":
            a = self.params[1]
            if not c + min(a, 0.0) > 0:
                raise DomainError("rational premium must stay positive: need c + a > 0")

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "PremiumFunction":
        return cls("constant", (float(c),))

    @classmethod
    def linear(cls, c: float, eps: float) -> "PremiumFunction":
        return cls("linear", (float(c), float(eps)))

    @classmethod
    def polynomial(cls, c: float, *eps: float) -> "PremiumFunction":
        """``p(u) = c + eps_1 u + ... + eps_l u**l``, all coefficients positive."""
        if len(eps) == 1:
            return cls.linear(c, eps[0])
        return cls("polynomial", (float(c),) + tuple(float(e) for e in eps))

    @classmethod
    def rational(cls, c: float, a: float) -> "PremiumFunction":
        """``p(u) = c + a / (1 + u)``; bounded, tends to ``c``."""
        return cls("bounded_p1", (float(c), float(a)))

    @classmethod
    def custom(cls, p, dp, d2p, *, bounded: bool, limit: float | None = None,
               name: str = "custom") -> "PremiumFunction":
        """Wrap user callables. ``bounded`` declares the intended class."""
        tag = "custom_p1" if bounded else "custom_p2"
        return cls(tag, (name,), p, dp, d2p, None if limit is None else float(limit))

    # -- evaluation ---------------------------------------------------------
    @property
    def c(self) -> float:
        """Premium level at zero for polynomials, limit for bounded premiums."""
        if self.tag.startswith("custom"):
            return float(_apply(self.fn, 0.0))
        return self.params[0]

    def derivative(self, u, k: int = 0):
        """k-th derivative of the premium at ``u`` (array friendly)."""
        arr = _as_array(u)
        if self.tag.startswith("custom"):
            fns = (self.fn, self.d1_fn, self.d2_fn)
            if k > 2:
                raise DomainError("custom premiums expose derivatives up to order 2")
            return _scalar_or_array(u, _apply(fns[k], arr))
        if self.tag == "constant":
            out = np.full(arr.shape, self.params[0] if k == 0 else 0.0)
        elif self.tag in ("linear", "polynomial"):
            coefs = np.array(self.params[::-1])  # highest degree first
            poly = np.poly1d(coefs)
            out = poly.deriv(k)(arr) if k else poly(arr)
            out = np.asarray(out, dtype=float) * np.ones(arr.shape)
        else:
            c, a = self.params
            base = a * math.factorial(k) * (-1.0) ** k / (1.0 + arr) ** (k + 1)
            out = base + (c if k == 0 else 0.0)
        return _scalar_or_array(u, out)

    def __call__(self, u):
        return self.derivative(u, 0)

    def d1(self, u):
        return self.derivative(u, 1)

    def d2(self, u):
        return self.derivative(u, 2)

    @property
    def builtin(self) -> bool:
        return not self.tag.startswith("custom")

    @property
    def limit(self) -> float:
        """``p(inf)``; ``inf`` for growing premiums."""
        if self.tag == "constant" or self.tag == "bounded_p1":
            return self.params[0]
        if self.tag in ("linear", "polynomial", "custom_p2"):
            return math.inf
        if self.limit_value is not None:
            return self.limit_value
        return float(_apply(self.fn, PROBE_GRID[-1]))

    def to_spec(self) -> str:
        """Inverse of :func:`parse_premium` for built-in tags."""
        fmt = lambda xs: ",".join(repr(float(x)) for x in xs)
        if self.tag == "constant":
            return f"const:{fmt(self.params)}"
        if self.tag == "linear":
            return f"linear:{fmt(self.params)}"
        if self.tag == "polynomial":
            return f"poly:{fmt(self.params)}"
        if self.tag == "bounded_p1":
            return f"ratl:{fmt(self.params)}"
        raise DomainError("custom premiums have no text form")


def parse_premium(text: str) -> PremiumFunction:
    """Parse ``const:c``, ``linear:c,eps``, ``poly:c,e1,...`` or ``ratl:c,a``."""
    if not isinstance(text, str) or ":" not in text:
        raise DomainError(f"bad premium spec {text!r}; expected kind:values")
    kind, _, rest = text.strip().partition(":")
    try:
        vals = [float(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"bad number in premium spec {text!r}") from None
    kind = kind.strip().lower()
    arity = {"const": (1, 1), "linear": (2, 2), "poly": (2, 64), "ratl": (2, 2)}
    if kind not in arity:
        raise DomainError(f"unknown premium kind {kind!r}")
    lo, hi = arity[kind]
    if not lo <= len(vals) <= hi:
        raise DomainError(f"premium kind {kind!r} takes {lo}..{hi} values, got {len(vals)}")
    if kind == "const":
        return PremiumFunction.constant(vals[0])
    if kind == "linear":
        return PremiumFunction.linear(*vals)
    if kind == "poly":
        return PremiumFunction.polynomial(*vals)
    return PremiumFunction.rational(*vals)


@dataclass(frozen=True)
class ModelSpec:
    case: Case
    lam: float
    mu: float
    premium: PremiumFunction

    def __post_init__(self):
        object.__setattr__(self, "case", Case.parse(self.case))
        for name in ("lam", "mu"):
            val = float(getattr(self, name))
            if not (val > 0 and math.isfinite(val)):
                raise DomainError(f"{name} must be positive and finite, got {val}")
            object.__setattr__(self, name, val)
        if not isinstance(self.premium, PremiumFunction):
            raise DomainError("premium must be a PremiumFunction")

    def describe(self) -> str:
        try:
            prem = self.premium.to_spec()
        except DomainError:
            prem = self.premium.tag
        return f"case={self.case.value} lambda={self.lam!r} mu={self.mu!r} premium={prem}"


def _probe(p: PremiumFunction):
    grid = np.array(PROBE_GRID)
    vals = np.asarray(p(grid), dtype=float)
    slopes = np.abs(np.asarray(p.d1(grid), dtype=float)) * grid ** 2
    grows = vals[6] / vals[3] > 10.0
    bounded = bool(np.all(np.isfinite(slopes))) and \
        slopes[-1] <= 10.0 * max(float(np.max(slopes[:4])), 1e-300) + 1e-12
    return grows, bounded


def classify_premium(p: PremiumFunction) -> PremiumClass:
    """Sort a premium into constant, bounded (P1) or growing (P2).

    Built-in tags classify by construction; custom premiums are probed on
    ``u = 1, 10, ..., 1e6`` and must agree with the declared class.
    """
    if p.tag == "constant":
        return PremiumClass.CONSTANT
    if p.tag in ("linear", "polynomial"):
        return PremiumClass.P2
    if p.tag == "bounded_p1":
        return PremiumClass.P1
    grows, bounded = _probe(p)
    if p.tag == "custom_p1":
        if bounded and not grows:
            return PremiumClass.P1
        raise ClassificationError(
            "premium declared bounded but probes show growth or slow slope decay")
    if grows and not bounded:
        return PremiumClass.P2
    raise ClassificationError("premium declared growing but probes do not show growth")


@dataclass(frozen=True)
class SafeLoadReport:
    satisfied: bool
    margin: float
    level: float
    regime: str = ""

    def __bool__(self):
        return self.satisfied


def safe_load_margin(case: Case, lam: float, mu: float, c: float) -> float:
    """Signed distance of the net-profit inequality; positive means safe."""
    case = Case.parse(case)
    if case is Case.EXP_EXP:
        return 1.0 - lam / (c * mu)
    if case is Case.ERLANG2_EXP:
        return 2.0 * c / lam - 1.0 / mu
    return mu * c / 2.0 - lam


def safe_load_check(m: ModelSpec) -> SafeLoadReport:
    """Net-profit check at the limiting premium level.

    For exp/Erlang(2) the report's ``regime`` is ``"one-root"`` when
    ``lam > mu c / 2`` (a single negative characteristic root) and
    ``"two-root"`` otherwise.

    Raises
    ------
    BoundaryError
        When the inequality holds with equality (within 1e-12).
    """
    cls = classify_premium(m.premium)
    if cls is PremiumClass.P2:
        return SafeLoadReport(True, math.inf, math.inf, "growing")
    c = m.premium.limit
    margin = safe_load_margin(m.case, m.lam, m.mu, c)
    if abs(margin) <= BOUNDARY_TOL:
        raise BoundaryError(
            f"{m.case.value}: degenerate boundary, net-profit inequality holds with equality "
            f"(lambda={m.lam}, mu={m.mu}, c={c})")
    regime = ""
    if m.case is Case.EXP_ERLANG2:
        regime = "two-root" if margin > 0 else "one-root"
    return SafeLoadReport(margin > 0, margin, c, regime)
