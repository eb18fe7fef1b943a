"""Pure numpy path kernel (fallback when the compiled kernel is absent)."""
import numpy as np

from ._philox import uniforms

CONSTANT, LINEAR, POLYNOMIAL, RATIONAL, CUSTOM = 0, 1, 2, 3, -1
MAX_STEP = 0.05
# paths whose flow passes this level (or the escape level) are survivors
FLOW_CAP = 1e150


def _rate(code, params, premium, x):
    if code == POLYNOMIAL:
        out = np.zeros_like(x)
        for coef in params[::-1]:
            out = out * x + coef
        return out
    if code == RATIONAL:
        return params[0] + params[1] / (1.0 + x)
    return np.asarray(premium(x), dtype=float)


def _slope(code, params, premium, x):
    if code == POLYNOMIAL:
        out = np.zeros_like(x)
        for k in range(len(params) - 1, 0, -1):
            out = out * x + k * params[k]
        return out
    if code == RATIONAL:
        return -params[1] / (1.0 + x) ** 2
    return np.asarray(premium.d1(x), dtype=float)


def _rk4_flow(code, params, premium, u, tau, cap):
    x = u.copy()
    rem = tau.copy()
    f = lambda v: _rate(code, params, premium, v)
    while True:
        sel = np.nonzero(rem > 0)[0]
        if sel.size == 0:
            return x
        xs = x[sel]
        r = rem[sel]
        h = np.minimum(r, MAX_STEP / (1.0 + np.abs(_slope(code, params, premium, xs))))
        k1 = f(xs)
        k2 = f(xs + 0.5 * h * k1)
        k3 = f(xs + 0.5 * h * k2)
        k4 = f(xs + h * k3)
        xs = xs + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out = xs >= cap
        x[sel] = np.where(out, np.inf, xs)
        rem[sel] = np.where((h >= r) | out, 0.0, r - h)


def flow(code, params, premium, u, tau, cap=FLOW_CAP):
    if code == CONSTANT:
        return u + params[0] * tau
    if code == LINEAR:
        c, eps = params[0], params[1]
        return u * np.exp(eps * tau) + (c / eps) * np.expm1(eps * tau)
    return _rk4_flow(code, params, premium, u, tau, cap)


def run_paths(arr_erlang, clm_erlang, lam, mu, code, params, u0, horizon, u_escape,
              seed, start, stop, premium=None):
    """Simulate paths ``start .. stop-1``; return ``(ruined, late_ruined)``."""
    params = np.asarray(params, dtype=float)
    idx = np.arange(start, stop, dtype=np.uint64)
    u = np.full(idx.shape, float(u0))
    t = np.zeros(idx.shape)
    half = 0.5 * horizon
    ruined = late = 0
    step = 0
    while idx.size:
        v0, v1, v2, v3 = uniforms(step, idx, seed)
        tau = -np.log(v0) / lam
        if arr_erlang:
            tau = tau - np.log(v1) / lam
        t = t + tau
        keep = t <= horizon
        if not keep.all():
            idx, u, t, tau, v2, v3 = idx[keep], u[keep], t[keep], tau[keep], v2[keep], v3[keep]
        u = flow(code, params, premium, u, tau, min(u_escape, FLOW_CAP))
        x = -np.log(v2) / mu
        if clm_erlang:
            x = x - np.log(v3) / mu
        u = u - x
        dead = u < 0.0
        n_dead = int(np.count_nonzero(dead))
        if n_dead:
            ruined += n_dead
            late += int(np.count_nonzero(dead & (t > half)))
        keep = ~dead & (u < u_escape)
        if not keep.all():
            idx, u, t = idx[keep], u[keep], t[keep]
        step += 1
    return ruined, late
