# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernel. Mirrors ``_kernel_py.run_paths`` path by path."""
from libc.math cimport log, exp, expm1, fabs, INFINITY
from libc.stdint cimport uint32_t, uint64_t

cdef uint64_t M0 = 0xD2511F53
cdef uint64_t M1 = 0xCD9E8D57
cdef uint32_t W0 = 0x9E3779B9
cdef uint32_t W1 = 0xBB67AE85
cdef double TWO_M32 = 2.3283064365386963e-10
cdef double MAX_STEP = 0.05
cdef double FLOW_CAP = 1e150


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t a0, a1, a2, a3
    cdef int r
    for r in range(10):
        if r:
            k0 = k0 + W0
            k1 = k1 + W1
        p0 = M0 * <uint64_t>c[0]
        p1 = M1 * <uint64_t>c[2]
        a0 = <uint32_t>(p1 >> 32) ^ c[1] ^ k0
        a1 = <uint32_t>p1
        a2 = <uint32_t>(p0 >> 32) ^ c[3] ^ k1
        a3 = <uint32_t>p0
        c[0] = a0
        c[1] = a1
        c[2] = a2
        c[3] = a3


cdef inline double _rate(int code, const double* pp, int n, double x) noexcept nogil:
    cdef double out = 0.0
    cdef int k
    if code == 0:
        return pp[0]
    if code == 1:
        return pp[0] + pp[1] * x
    if code == 2:
        for k in range(n - 1, -1, -1):
            out = out * x + pp[k]
        return out
    return pp[0] + pp[1] / (1.0 + x)


cdef inline double _slope(int code, const double* pp, int n, double x) noexcept nogil:
    cdef double out = 0.0
    cdef int k
    if code == 2:
        for k in range(n - 1, 0, -1):
            out = out * x + k * pp[k]
        return out
    return -pp[1] / ((1.0 + x) * (1.0 + x))


cdef inline double _flow(int code, const double* pp, int n, double u, double tau,
                         double cap) noexcept nogil:
    cdef double h, rem, k1, k2, k3, k4
    if code == 0:
        return u + pp[0] * tau
    if code == 1:
        return u * exp(pp[1] * tau) + (pp[0] / pp[1]) * expm1(pp[1] * tau)
    rem = tau
    while rem > 0:
        h = MAX_STEP / (1.0 + fabs(_slope(code, pp, n, u)))
        if h >= rem:
            h = rem
            rem = 0.0
        else:
            rem = rem - h
        k1 = _rate(code, pp, n, u)
        k2 = _rate(code, pp, n, u + 0.5 * h * k1)
        k3 = _rate(code, pp, n, u + 0.5 * h * k2)
        k4 = _rate(code, pp, n, u + h * k3)
        u = u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if u >= cap:
            return INFINITY
    return u


def run_paths(int arr_erlang, int clm_erlang, double lam, double mu, int code,
              double[::1] params, double u0, double horizon, double u_escape,
              unsigned long long seed, long long start, long long stop, premium=None):
    """Simulate paths ``start .. stop-1``; return ``(ruined, late_ruined)``."""
    if code < 0:
        raise ValueError("custom premiums need the numpy kernel")
    cdef const double* pp = &params[0]
    cdef int n = params.shape[0]
    cdef uint32_t k0 = <uint32_t>seed
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef uint32_t ctr[4]
    cdef long long path, ruined = 0, late = 0
    cdef uint64_t step
    cdef double u, t, tau, x, half = 0.5 * horizon
    cdef double cap = u_escape if u_escape < FLOW_CAP else FLOW_CAP
    with nogil:
        for path in range(start, stop):
            u = u0
            t = 0.0
            step = 0
            while True:
                ctr[0] = <uint32_t>step
                ctr[1] = 0
                ctr[2] = <uint32_t>(<uint64_t>path)
                ctr[3] = <uint32_t>(<uint64_t>path >> 32)
                _philox(ctr, k0, k1)
                tau = -log((ctr[0] + 0.5) * TWO_M32) / lam
                if arr_erlang:
                    tau = tau - log((ctr[1] + 0.5) * TWO_M32) / lam
                t = t + tau
                if t > horizon:
                    break
                u = _flow(code, pp, n, u, tau, cap)
                x = -log((ctr[2] + 0.5) * TWO_M32) / mu
                if clm_erlang:
                    x = x - log((ctr[3] + 0.5) * TWO_M32) / mu
                u = u - x
                if u < 0.0:
                    ruined += 1
                    if t > half:
                        late += 1
                    break
                if u >= u_escape:
                    break
                step += 1
    return ruined, late
