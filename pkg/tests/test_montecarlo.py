import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from surplus_ruin import DomainError, ModelSpec, PremiumFunction
from surplus_ruin.analysis import log_slope
from surplus_ruin.exact import ruin_constant_premium
from surplus_ruin.montecarlo import (BACKENDS, DEFAULT_BACKEND, as_curve, escape_level, flow_map,
                                     simulate_curve, simulate_ruin)
from surplus_ruin.montecarlo import _philox, simulate as sim_mod

HAVE_COMPILED = sim_mod._compiled_run_paths is not None


@pytest.mark.parametrize("ctr, key, expect", [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
])
def test_philox_known_answers(ctr, key, expect):
    out = _philox.philox4x32(*ctr, *key)
    assert tuple(int(x) for x in out) == expect


def test_uniforms_open_interval_and_stream_independence():
    u = _philox.uniforms(3, np.arange(10_000), 99)
    for arr in u:
        assert np.all((arr > 0) & (arr < 1))
        assert abs(arr.mean() - 0.5) < 0.01
    # a path's numbers do not depend on which other paths are drawn
    sub = _philox.uniforms(3, np.array([17, 4242]), 99)
    assert sub[0][1] == u[0][4242]


def test_flow_map_closed_forms():
    assert flow_map(PremiumFunction.constant(2.0), 1.0, 3.0) == 7.0
    p = PremiumFunction.linear(1.0, 0.5)
    assert flow_map(p, 1.0, 2.0) == pytest.approx((1.0 + 2.0) * math.exp(1.0) - 2.0, rel=1e-14)


@given(st.floats(0.1, 3), st.floats(0.05, 2), st.floats(0, 10), st.floats(0, 5))
@settings(max_examples=30)
def test_flow_map_numeric_matches_closed_form(c, eps, u, t):
    p = PremiumFunction.linear(c, eps)
    assert flow_map(p, u, t, numeric=True) == pytest.approx(flow_map(p, u, t), rel=1e-9)


def test_flow_map_rejects_negative_time():
    with pytest.raises(DomainError):
        flow_map(PremiumFunction.constant(1.0), 0.0, -1.0)


def test_exp_exp_at_zero_within_interval():
    m = ModelSpec("exp-exp", 1, 2, PremiumFunction.constant(1))
    r = simulate_ruin(m, 0.0, horizon=200.0, n_paths=1_000_000, seed=2024)
    assert abs(r.psi_hat - 0.5) <= r.half_width_95
    assert r.ci[0] < r.psi_hat < r.ci[1]
    assert not r.truncation_flag


def test_large_reserve_is_safe():
    m = ModelSpec("erlang2-exp", 1, 2, PremiumFunction.constant(1))
    r = simulate_ruin(m, 50.0, n_paths=20_000, seed=1)
    assert r.psi_hat == 0.0 and not r.truncation_flag


def test_erlang2_arrivals_log_slope():
    m = ModelSpec("erlang2-exp", 1, 2, PremiumFunction.constant(1))
    u = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    res = simulate_curve(m, u, n_paths=400_000, seed=8)
    slope = log_slope(u, [r.psi_hat for r in res])
    assert -slope == pytest.approx(math.sqrt(3), rel=0.05)


def test_reproducible_and_worker_independent():
    m = ModelSpec("exp-erlang2", 1, 3, PremiumFunction.rational(1, 0.5))
    a = simulate_ruin(m, 1.0, n_paths=40_000, seed=77, horizon=20.0)
    b = simulate_ruin(m, 1.0, n_paths=40_000, seed=77, horizon=20.0, workers=4)
    assert a == b
    c = simulate_ruin(m, 1.0, n_paths=40_000, seed=78, horizon=20.0)
    assert c.ruined_paths != a.ruined_paths


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernel not built")
@pytest.mark.parametrize("prem", [PremiumFunction.constant(1.0), PremiumFunction.linear(1, 0.5),
                                  PremiumFunction.polynomial(1, 0.2, 0.1),
                                  PremiumFunction.rational(1, 0.5)])
@pytest.mark.parametrize("case", ["exp-exp", "erlang2-exp", "exp-erlang2"])
def test_backends_agree(case, prem):
    m = ModelSpec(case, 1, 3, prem)
    a = simulate_ruin(m, 0.5, horizon=30.0, n_paths=5_000, seed=3, backend="compiled")
    b = simulate_ruin(m, 0.5, horizon=30.0, n_paths=5_000, seed=3, backend="python")
    assert a.ruined_paths == b.ruined_paths and a.late_ruined_paths == b.late_ruined_paths


def test_custom_premium_uses_python_kernel():
    prem = PremiumFunction.custom(lambda u: 1 + 0.5 / (1 + u), lambda u: -0.5 / (1 + u) ** 2,
                                  lambda u: 1.0 / (1 + u) ** 3, bounded=True)
    ref = PremiumFunction.rational(1, 0.5)
    a = simulate_ruin(ModelSpec("exp-exp", 1, 3, prem), 0.5, horizon=20.0, n_paths=3000, seed=4)
    b = simulate_ruin(ModelSpec("exp-exp", 1, 3, ref), 0.5, horizon=20.0, n_paths=3000, seed=4,
                      backend="python")
    assert a.ruined_paths == b.ruined_paths


def test_escape_level():
    assert escape_level(ModelSpec("exp-exp", 1, 2, PremiumFunction.constant(1))) == pytest.approx(40.0)
    unsafe = ModelSpec("exp-exp", 2, 1, PremiumFunction.constant(1))
    assert escape_level(unsafe) == math.inf
    grow = ModelSpec("exp-exp", 2, 1, PremiumFunction.linear(1, 1))
    assert math.isfinite(escape_level(grow))


def test_horizon_extension_and_flag():
    # a nearly critical model keeps ruining late; the auto horizon grows
    m = ModelSpec("exp-exp", 1, 1, PremiumFunction.constant(1.05))
    r = simulate_ruin(m, 0.0, n_paths=4_000, seed=9)
    assert r.horizon > 100.0
    fixed = simulate_ruin(m, 0.0, horizon=5.0, n_paths=4_000, seed=9)
    assert fixed.horizon == 5.0 and fixed.truncation_flag


@pytest.mark.parametrize("kwargs", [dict(n_paths=0), dict(horizon=-1.0), dict(seed=-1),
                                    dict(backend="gpu")])
def test_validation(kwargs):
    m = ModelSpec("exp-exp", 1, 2, PremiumFunction.constant(1))
    with pytest.raises(DomainError):
        simulate_ruin(m, 0.0, **kwargs)


def test_as_curve():
    m = ModelSpec("erlang2-exp", 1, 2, PremiumFunction.constant(1))
    res = simulate_curve(m, [0.0, 1.0], n_paths=20_000, seed=5)
    curve = as_curve(m, res)
    assert curve.method == "mc" and len(curve) == 2
    _, ref = ruin_constant_premium("erlang2-exp", 1, 1, 2, curve.u)
    assert np.all(np.abs(curve.psi - ref) < 3 * curve.err)


def test_backend_registry():
    assert DEFAULT_BACKEND in BACKENDS
