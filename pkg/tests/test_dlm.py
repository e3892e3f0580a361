import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprbsim.dlm import DlmState, polarizer_response, step, step_many, trial_vectors


def test_trial_vector_enumeration_order():
    vs = trial_vectors(DlmState.initial(0.5))
    signs = [(v.delta, v.s, v.s_prime) for v in vs]
    assert signs == [
        (1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1),
        (-1, 1, 1), (-1, 1, -1), (-1, -1, 1), (-1, -1, -1),
    ]


def test_trials_on_x_axis_reproduce_state_exactly():
    # sqrt(1 - l^2 + l^2 * 1) = 1, so the y-rescaling rules with s=+1 give (1, 0).
    for l in (0.1, 0.5, 0.999):
        vs = trial_vectors(DlmState(1.0, 0.0, l))
        for v in vs:
            if v.delta == -1 and v.s == 1:
                assert (v.x, v.y) == (1.0, 0.0)


def test_trials_on_y_axis_reproduce_state_exactly():
    for l in (0.1, 0.5, 0.999):
        vs = trial_vectors(DlmState(0.0, 1.0, l))
        for v in vs:
            if v.delta == 1 and v.s == 1:
                assert (v.x, v.y) == (0.0, 1.0)


def test_trial_value_direct_evaluation():
    vs = trial_vectors(DlmState(1.0, 0.0, 0.999))
    v = vs[0]  # (delta, s, s') = (+1, +1, +1)
    assert v.x == pytest.approx(0.999, abs=0)
    assert v.y == pytest.approx(math.sqrt(1.0 - 0.999**2), rel=1e-15)
    assert v.y == pytest.approx(0.0447102, abs=5e-8)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.01, 0.999))
@settings(max_examples=200)
def test_all_trials_unit_norm(phi, l):
    state = DlmState(math.cos(phi), math.sin(phi), l)
    for v in trial_vectors(state):
        assert abs(v.x**2 + v.y**2 - 1.0) < 1e-12


def test_step_aligned_input_fires_plus_channel():
    state = DlmState(1.0, 0.0, 0.999)
    channel, new = step(state, (1.0, 0.0))
    assert channel == 1
    assert (new.x, new.y) == (1.0, 0.0)


def test_step_orthogonal_input_fires_minus_channel():
    state = DlmState(0.0, 1.0, 0.999)
    channel, new = step(state, (0.0, 1.0))
    assert channel == -1
    assert (new.x, new.y) == (0.0, 1.0)


def test_step_rejects_non_unit_input():
    with pytest.raises(ValueError):
        step(DlmState.initial(0.5), (0.5, 0.5))


def test_step_tie_breaks_by_enumeration_order():
    # From (1, 0) toward (0, 1): the two delta=+1, s=+1 trials (+-l, sqrt(1-l^2))
    # are equidistant from the y-axis; the s'=+1 variant comes first.
    l = 0.9
    channel, new = step(DlmState(1.0, 0.0, l), (0.0, 1.0))
    assert channel == -1
    assert new.x == pytest.approx(l, abs=0)
    assert new.y == pytest.approx(math.sqrt(1 - l * l), rel=1e-15)


def test_step_matches_trial_vector_argmin():
    rng = np.random.default_rng(11)
    state = DlmState.initial(0.99)
    for _ in range(500):
        a = rng.uniform(0, 2 * math.pi)
        y = (math.cos(a), math.sin(a))
        vs = trial_vectors(state)
        d2 = [(y[0] - v.x) ** 2 + (y[1] - v.y) ** 2 for v in vs]
        best = vs[int(np.argmin(d2))]
        channel, state = step(state, y)
        assert channel == -best.delta
        assert (state.x, state.y) == (best.x, best.y)


def test_polarizer_response_uses_relative_angle():
    state = DlmState.initial(0.999)
    ch, _ = polarizer_response(state, 0.7, 0.7)
    assert ch == 1
    ch, _ = polarizer_response(state, 0.7 + math.pi / 2, 0.7)
    assert ch == -1


def test_unit_norm_preserved_over_long_runs():
    rng = np.random.default_rng(5)
    angles = rng.uniform(0, 2 * math.pi, 20_000)
    inputs = np.column_stack([np.cos(angles), np.sin(angles)])
    _, state = step_many(DlmState.initial(0.999), inputs)
    assert abs(state.x**2 + state.y**2 - 1.0) < 1e-12


def test_determinism():
    rng = np.random.default_rng(6)
    angles = rng.uniform(0, 2 * math.pi, 5_000)
    inputs = np.column_stack([np.cos(angles), np.sin(angles)])
    out1, s1 = step_many(DlmState.initial(0.99), inputs)
    out2, s2 = step_many(DlmState.initial(0.99), inputs)
    assert np.array_equal(out1, out2)
    assert (s1.x, s1.y) == (s2.x, s2.y)


@pytest.mark.parametrize("psi", np.linspace(0, math.pi, 16, endpoint=False))
def test_malus_convergence(psi):
    # Fixed input direction: outcome mean converges to cos(2*psi).
    n = 200_000
    inputs = np.tile([math.cos(psi), math.sin(psi)], (n, 1))
    out, _ = step_many(DlmState.initial(0.999), inputs)
    assert abs(out.mean() - math.cos(2 * psi)) < 0.02


@pytest.mark.parametrize("theta", [0.0, 0.3, 2.0])
def test_uniform_input_balance(theta):
    rng = np.random.default_rng(17)
    xi = rng.uniform(0, 2 * math.pi, 1_000_000)
    inputs = np.column_stack([np.cos(xi - theta), np.sin(xi - theta)])
    out, _ = step_many(DlmState.initial(0.999), inputs)
    assert abs(out.mean()) < 0.01


def test_tracks_sign_of_cos_for_uniform_inputs():
    theta = 0.3
    rng = np.random.default_rng(23)
    xi = rng.uniform(0, 2 * math.pi, 100_000)
    inputs = np.column_stack([np.cos(xi - theta), np.sin(xi - theta)])
    out, _ = step_many(DlmState.initial(0.999), inputs)
    want = np.where(np.cos(2 * (xi - theta)) >= 0, 1, -1)
    agree = np.mean(out[1000:] == want[1000:])
    assert agree >= 0.99
