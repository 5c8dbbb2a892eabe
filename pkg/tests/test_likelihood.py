import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import simpson

from conftest import rrc_closed_form
from temlink.errors import DimensionMismatch, InvalidFiringRecord, InvalidInterval
from temlink.if_tem import ConstantSignal, NoiseModel, TemParams, encode
from temlink.likelihood import build_matrices, integrated_pulse, integrated_pulse_dshift, \
    log_likelihood, observation_vector, pulse_matrix, pulse_matrix_dshift
from temlink.waveform import TxSignal, make_pulse, pam_constellation, random_frame, \
    rectangular_pulse, rrc_pulse


def _simpson_oracle(a, b, shift, beta=0.5, half=2.5, n=10_001):
    lo, hi = max(a - shift, -half), min(b - shift, half)
    if lo >= hi:
        return 0.0
    u = np.linspace(lo, hi, n)
    # keep the nodes off the removable singularities of the closed form
    return simpson(rrc_closed_form(u + 1e-13 * (np.abs(np.abs(u) - 0.5) < 1e-12), beta), x=u)


def test_rectangular_quarter_overlap():
    assert integrated_pulse(rectangular_pulse(), 0.0, 0.25, 0.0) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("kind", ["rectangular", "triangular", "rrc"])
@pytest.mark.parametrize("method", ["antiderivative", "quad"])
def test_disjoint_interval_integrates_to_zero(kind, method):
    p = make_pulse(kind)
    A = p.half_support
    assert integrated_pulse(p, A + 0.1, A + 2.0, 0.0, method=method) == 0.0
    assert integrated_pulse(p, -A - 3.0, -A - 0.01, 0.0, method=method) == 0.0
    assert integrated_pulse(p, 10.0, 11.0, 10.0 - A - 1.5, method=method) == 0.0


def test_rrc_interval_integral_matches_simpson(rrc):
    rng = np.random.default_rng(4)
    for _ in range(40):
        a = rng.uniform(-3.5, 3.0)
        b = a + rng.uniform(0.05, 2.5)
        s = rng.uniform(-0.5, 0.5)
        ref = _simpson_oracle(a, b, s)
        assert integrated_pulse(rrc, a, b, s) == pytest.approx(ref, abs=1e-10)
        assert integrated_pulse(rrc, a, b, s, method="quad") == pytest.approx(ref, abs=1e-10)


def test_integrated_pulse_broadcasts(rrc):
    a = np.linspace(-2, 1, 7)
    out = integrated_pulse(rrc, a, a + 0.5, np.zeros((3, 1)))
    assert out.shape == (3, 7)
    np.testing.assert_allclose(out[1], [integrated_pulse(rrc, x, x + 0.5) for x in a], atol=0)


def test_reversed_interval_rejected(rrc):
    with pytest.raises(InvalidInterval):
        integrated_pulse(rrc, 1.0, 1.0)
    with pytest.raises(InvalidInterval):
        integrated_pulse_dshift(rrc, [0.0, 2.0], [1.0, 1.0])


# shift derivative ------------------------------------------------------------

def test_dshift_zero_when_interval_covers_support(rrc):
    assert integrated_pulse_dshift(rrc, -3.0, 3.0, 0.1) == 0.0


def test_dshift_rectangular_one_endpoint_inside():
    p = rectangular_pulse(2.0)
    # leading edge inside: moving the pulse right removes mass
    assert integrated_pulse_dshift(p, 0.0, 5.0, 0.0) == pytest.approx(1 / 2.0)
    assert integrated_pulse_dshift(p, -5.0, 0.3, 0.0) == pytest.approx(-1 / 2.0)


def test_dshift_matches_finite_differences(rrc):
    rng = np.random.default_rng(6)
    h = 1e-6
    checked = 0
    while checked < 100:
        a = rng.uniform(-2.4, 2.0)
        b = a + rng.uniform(0.1, 2.0)
        s = rng.uniform(-0.5, 0.5)
        # the truncation jumps make the derivative singular; stay clear of them
        if min(abs(abs(a - s) - 2.5), abs(abs(b - s) - 2.5)) < 1e-3:
            continue
        fd = (integrated_pulse(rrc, a, b, s + h) - integrated_pulse(rrc, a, b, s - h)) / (2 * h)
        an = integrated_pulse_dshift(rrc, a, b, s)
        assert abs(fd - an) <= 1e-6 * max(abs(an), 1e-3)
        checked += 1


def test_pulse_matrix_shift_derivative(rrc):
    t = np.array([-0.25, 0.4, 1.3, 2.05, 2.9])
    c = np.arange(4) * 1.0 + 0.2
    h = 1e-6
    fd = (pulse_matrix(t, c + h, rrc) - pulse_matrix(t, c - h, rrc)) / (2 * h)
    np.testing.assert_allclose(pulse_matrix_dshift(t, c, rrc), fd, rtol=0, atol=1e-7)


# matrices --------------------------------------------------------------------

def test_observation_vector_zero_for_constant_rate():
    params = TemParams(kappa=1.0, delta=1.0, bias=1.7)
    rec = encode(ConstantSignal(0.0), params, window=(0, 20))
    np.testing.assert_allclose(observation_vector(rec.times, params), 0.0, atol=1e-12)


def test_noiseless_identity_at_true_offset(rrc, pam4, tem, rng):
    for tau in [-0.45, 0.0, 0.31]:
        frame = random_frame(rng, pam4, 12, 16)
        rec = encode(TxSignal(frame, rrc, tau), tem)
        m = build_matrices(rec.times, 12, 16, tau, rrc, tem)
        assert np.max(np.abs(m.residual(frame.pilots, frame.data))) < 1e-8
        assert m.P.shape == (len(rec) - 1, 12) and m.G.shape == (len(rec) - 1, 16)


def test_rectangular_two_interval_hand_case():
    # pulses 1/T on [lT - T/2, lT + T/2), T = 1, tau = 0.1, one pilot and two data
    p = rectangular_pulse()
    params = TemParams(kappa=1.0, delta=1.0, bias=2.0)
    t = np.array([0.2, 1.0, 2.3])
    m = build_matrices(t, 1, 2, 0.1, p, params)
    # supports: pilot [-0.4, 0.6), data0 [0.6, 1.6), data1 [1.6, 2.6)
    np.testing.assert_allclose(m.P, [[0.4], [0.0]], atol=1e-15)
    np.testing.assert_allclose(m.G, [[0.4, 0.0], [0.6, 0.7]], atol=1e-15)
    np.testing.assert_allclose(m.y, [1.0 - 2.0 * 0.8, 1.0 - 2.0 * 1.3])
    np.testing.assert_allclose(m.weights, [1 / 0.8, 1 / 1.3])


def test_residual_dimension_checks(rrc, tem):
    m = build_matrices(np.array([0.0, 0.4, 0.9]), 3, 2, 0.0, rrc, tem)
    with pytest.raises(DimensionMismatch):
        m.residual(np.ones(2), np.ones(2))
    with pytest.raises(InvalidFiringRecord):
        build_matrices(np.array([0.0]), 3, 2, 0.0, rrc, tem)
    with pytest.raises(InvalidFiringRecord):
        build_matrices(np.array([0.0, 0.5, 0.5]), 3, 2, 0.0, rrc, tem)


# likelihood ------------------------------------------------------------------

@pytest.fixture(scope="module")
def noiseless_case():
    pulse = rrc_pulse()
    c = pam_constellation(4)
    params = TemParams(kappa=1.0, delta=1.0, bias=2.5)
    frame = random_frame(np.random.default_rng(77), c, 12, 16)
    tau = -0.17
    rec = encode(TxSignal(frame, pulse, tau), params)
    return c, pulse, params, frame, tau, rec


def test_log_likelihood_zero_at_truth(noiseless_case):
    c, pulse, params, frame, tau, rec = noiseless_case
    m = build_matrices(rec.times, 12, 16, tau, pulse, params)
    assert abs(log_likelihood(m, frame.pilots, frame.data)) < 1e-12


def test_any_single_symbol_change_lowers_likelihood(noiseless_case):
    c, pulse, params, frame, tau, rec = noiseless_case
    m = build_matrices(rec.times, 12, 16, tau, pulse, params)
    best = log_likelihood(m, frame.pilots, frame.data)
    for i in range(16):
        for s in c.points:
            if s == frame.data[i]:
                continue
            d = frame.data.copy()
            d[i] = s
            assert log_likelihood(m, frame.pilots, d) < best


def test_weight_scaling_preserves_argmax():
    pulse = rrc_pulse()
    c = pam_constellation(2)
    params = TemParams(kappa=1.0, delta=1.0, bias=2.0)
    frame = random_frame(np.random.default_rng(3), c, 6, 3)
    rec = encode(TxSignal(frame, pulse, 0.2), params, NoiseModel.awgn(0.05, 11))
    cands = [np.array(s) for s in np.array(np.meshgrid(*[c.points] * 3)).reshape(3, -1).T]
    for tau in np.linspace(-0.5, 0.5, 11):
        m = build_matrices(rec.times, 6, 3, tau, pulse, params)
        vals = np.array([log_likelihood(m, frame.pilots, s) for s in cands])
        for scale in [1e-3, 0.7, 42.0]:
            ms = type(m)(m.y, m.P, m.G, scale * m.weights, m.tau)
            scaled = np.array([log_likelihood(ms, frame.pilots, s) for s in cands])
            np.testing.assert_allclose(scaled, scale * vals, rtol=1e-12)
            assert np.argmax(scaled) == np.argmax(vals)


@given(a=st.floats(-4, 4), length=st.floats(1e-3, 3), s=st.floats(-1, 1))
def test_interval_additivity(a, length, s):
    p = rrc_pulse()
    mid = a + 0.37 * length
    whole = integrated_pulse(p, a, a + length, s)
    parts = integrated_pulse(p, a, mid, s) + integrated_pulse(p, mid, a + length, s)
    assert whole == pytest.approx(parts, abs=1e-13)
