import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from disconj.coeffexpr import ExprDomainError
from disconj.errors import IntegrationError, ProblemError
from disconj.odecore import (
    GridSpec,
    ProblemDef,
    canonical_initial_state,
    companion_rhs,
    endpoint_states,
    integrate_fundamental,
    integrate_states,
)


def rel_err(x, ref):
    return float(np.abs(x - ref).max() / max(np.abs(ref).max(), 1e-300))


# companion right-hand side


def test_rhs_free_second_order():
    p = ProblemDef.from_strings(2, ["0", "0"], [0, 1])
    assert companion_rhs(p, 0.0, 0.3, [1.0, 2.0]).tolist() == [2.0, 0.0]


def test_rhs_third_order_cos():
    p = ProblemDef.from_strings(3, ["cos(10*t)", "0", "0"], [0, 1])
    assert companion_rhs(p, 5.0, 0.0, [1.0, 0.0, 4.0]).tolist() == [0.0, 4.0, -9.0]


@pytest.mark.parametrize("t", [0.0, 0.4, 1.0])
def test_rhs_fourth_order_fifty(t):
    p = ProblemDef.from_strings(4, ["0", "50", "0", "0"], [0, 1])
    assert companion_rhs(p, 0.0, t, [0.0, 0.0, 1.0, 0.0]).tolist() == [0.0, 1.0, 0.0, -50.0]


def test_rhs_checks_state_length():
    p = ProblemDef.from_strings(2, ["0", "0"], [0, 1])
    with pytest.raises(ValueError):
        companion_rhs(p, 0.0, 0.0, [1.0, 2.0, 3.0])


def test_rhs_propagates_domain_error():
    p = ProblemDef.from_strings(2, ["0", "ln(t)"], [0, 1])
    with pytest.raises(ExprDomainError):
        companion_rhs(p, 0.0, 0.0, [1.0, 0.0])


# problem validation


@pytest.mark.parametrize(
    "args",
    [
        (1, ["0"], [0, 1]),
        (3, ["0", "0"], [0, 1]),
        (2, ["0", "0"], [1, 1]),
        (2, ["0", "0"], [1, 0]),
        (2, ["0", "0"], [0, math.inf]),
    ],
)
def test_problem_rejects_invalid(args):
    with pytest.raises(ProblemError):
        ProblemDef.from_strings(*args)


def test_grid_rejects_invalid():
    with pytest.raises(ProblemError):
        GridSpec(nodes=63)
    with pytest.raises(ProblemError):
        GridSpec(atol=0.0)


# fundamental system


def test_second_order_free():
    fs = integrate_fundamental(ProblemDef.from_strings(2, ["0", "0"], [0.5, 2.0]), 0.0)
    assert np.allclose(fs.y(1), fs.t - 0.5, atol=1e-12)
    assert np.allclose(fs.y(2), 1.0, atol=1e-12)
    assert fs.t[0] == 0.5 and fs.t[-1] == 2.0 and len(fs.t) == 2048
    assert np.allclose(np.diff(fs.t), 1.5 / 2047)


def test_third_order_free():
    fs = integrate_fundamental(ProblemDef.from_strings(3, ["0", "0", "0"], [0, 1]), 0.0)
    assert np.allclose(fs.y(1), fs.t**2 / 2, atol=1e-12)
    assert np.allclose(fs.y(1, 1), fs.t, atol=1e-12)


def test_fourth_order_against_root_oracle():
    fs = integrate_fundamental(ProblemDef.from_strings(4, ["0", "0", "0", "0"], [0, 1]), -1.0)
    ref = oracles.root_states([0, 0, 0, 0], -1.0, fs.t)
    # basis of exp(t), exp(-t), sin t, cos t
    assert np.abs(fs.states - ref).max() < 1e-8


def test_initial_node_is_exact():
    p = ProblemDef.from_strings(5, ["t", "1", "sin(t)", "0", "2"], [0, 1])
    fs = integrate_fundamental(p, 3.0)
    assert np.array_equal(fs.states[0], canonical_initial_state(5))
    assert np.array_equal(fs.state_at(0.0), canonical_initial_state(5))
    for j in range(1, 6):
        for d in range(5):
            assert fs.y(j, d)[0] == (1.0 if d == 5 - j else 0.0)
    assert np.all(np.isfinite(fs.states))


def test_state_at_between_nodes_matches_oracle():
    p = ProblemDef.from_strings(3, ["1", "-2", "0.5"], [0, 1])
    fs = integrate_fundamental(p, 4.0)
    ts = np.random.default_rng(1).uniform(0, 1, 50)
    ref = oracles.expm_states([0.5, -2.0, 1.0], 4.0, ts)
    assert rel_err(fs.state_at(ts), ref) < 1e-8


def test_state_at_rejects_outside():
    fs = integrate_fundamental(ProblemDef.from_strings(2, ["0", "0"], [0, 1]), 0.0)
    with pytest.raises(ValueError):
        fs.state_at(1.5)


def test_variable_coefficient_against_scipy():
    p = ProblemDef.from_strings(3, ["cos(10*t)", "0", "0"], [0, 1])
    fs = integrate_fundamental(p, 20.0)
    ref = oracles.ivp_states(lambda t: [0.0, 0.0, math.cos(10 * t)], 3, 20.0, 0.0, 1.0, fs.t)
    assert rel_err(fs.states, ref) < 1e-8


@given(
    n=st.integers(2, 5),
    seed=st.integers(0, 2**31),
    M=st.floats(-50.0, 50.0),
)
def test_constant_coefficients_match_expm(n, seed, M):
    c = np.random.default_rng(seed).uniform(-5, 5, n)
    p = ProblemDef.from_strings(n, [repr(float(x)) for x in c[::-1]], [0, 1])
    g = GridSpec(nodes=64)
    fs = integrate_fundamental(p, M, g)
    ref = oracles.expm_states(c, M, fs.t)
    assert rel_err(fs.states, ref) < 1e-7


@pytest.mark.parametrize("j", [1, 2, 3])
def test_linearity(j):
    p = ProblemDef.from_strings(3, ["cos(10*t)", "t", "1"], [0, 1])
    g = GridSpec()
    fs = integrate_fundamental(p, 7.0, g)
    c = -3.7
    v = integrate_states(p, 7.0, 0.0, c * canonical_initial_state(3)[:, j - 1], g)
    assert rel_err(v(fs.t), c * fs.states[:, :, j - 1]) < 10 * g.rtol


def test_halving_tolerances_converges():
    p = ProblemDef.from_strings(4, ["0", "50", "0", "0"], [0, 1])
    coarse = GridSpec(atol=1e-8, rtol=1e-8)
    fine = GridSpec(atol=5e-9, rtol=5e-9)
    a = integrate_fundamental(p, 200.0, coarse).states
    b = integrate_fundamental(p, 200.0, fine).states
    scale = np.abs(b).max(axis=0)  # per derivative order and solution
    assert np.all(np.abs(a - b) <= coarse.rtol * scale)


def test_endpoint_states_match_fundamental():
    p = ProblemDef.from_strings(4, ["0", "50", "0", "0"], [0, 1])
    Ms = np.array([0.0, 200.0, -3000.0])
    Y, log_scale = endpoint_states(p, Ms)
    for M, y, ls in zip(Ms, Y, log_scale):
        ref = integrate_fundamental(p, M).states[-1]
        assert rel_err(y * math.exp(ls), ref) < 1e-8


def test_endpoint_states_rescale_large_growth():
    # u'' - 10^6 u grows like exp(1000), beyond double range
    p = ProblemDef.from_strings(2, ["0", "0"], [0, 1])
    Y, log_scale = endpoint_states(p, [-1e6])
    assert np.all(np.isfinite(Y)) and log_scale[0] > 600
    # y_1(1) = sinh(1000)/1000, log ~ 1000 - ln 2000
    log_y1 = math.log(Y[0, 0, 0]) + log_scale[0]
    assert log_y1 == pytest.approx(1000 - math.log(2000), rel=1e-9)


def test_singular_coefficient_fails_with_location():
    p = ProblemDef.from_strings(2, ["0", "-1/(0.5-t)^4"], [0, 1])
    with pytest.raises(IntegrationError) as info:
        integrate_fundamental(p, 0.0)
    assert 0.45 < info.value.t < 0.5
