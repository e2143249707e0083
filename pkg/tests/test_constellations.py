import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mercuryflow import constellations as cons
from mercuryflow.errors import InvalidInputError

FINITE = ("bpsk", "4pam", "16pam", "32pam")


# ---------------------------------------------------------------------------
# construction and validation
# ---------------------------------------------------------------------------

def test_builtins_resolve():
    for name in (*FINITE, "gaussian"):
        c = cons.by_name(name)
        assert c.label == name


def test_pam_unit_power_and_zero_mean():
    for q in (2, 4, 8, 16, 32):
        c = cons.pam(q)
        assert c.cardinality == q
        assert abs(np.sum(c.probs * c.points**2) - 1.0) < 1e-12
        assert abs(np.sum(c.probs * c.points)) < 1e-14


def test_validation_rejects_bad_probabilities():
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", np.array([-1.0, 1.0]), np.array([0.6, 0.5]))
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", np.array([-1.0, 1.0]), np.array([1.0, 0.0]))


def test_validation_rejects_duplicate_points():
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", np.array([1.0, 1.0]), np.array([0.5, 0.5]))


def test_validation_rejects_wrong_power():
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", np.array([-2.0, 2.0]), np.array([0.5, 0.5]))


def test_validation_rejects_dc_offset():
    pts = np.array([0.0, math.sqrt(2.0)])
    with pytest.raises(InvalidInputError):
        cons.Constellation("discrete", pts, np.array([0.5, 0.5]))


def test_unknown_name():
    with pytest.raises(InvalidInputError):
        cons.by_name("qam64")


# ---------------------------------------------------------------------------
# conditional mean
# ---------------------------------------------------------------------------

def test_conditional_mean_bpsk_symmetry():
    assert cons.conditional_mean(cons.bpsk(), y=0.0, snr=4.0) == pytest.approx(0.0, abs=1e-15)


def test_conditional_mean_gaussian_closed_form():
    assert cons.conditional_mean(cons.gaussian(), y=2.0, snr=1.0) == pytest.approx(1.0, abs=1e-15)


def test_conditional_mean_4pam_direct_sum():
    # independent evaluation: explicit Bayes weights with math.fsum accumulation
    c = cons.pam(4)
    y, snr = 0.7, 2.0
    a = math.sqrt(snr)
    weights = [p * math.exp(-0.5 * (y - a * s) ** 2) for s, p in zip(c.points, c.probs)]
    expected = math.fsum(w * s for w, s in zip(weights, c.points)) / math.fsum(weights)
    assert cons.conditional_mean(c, y, snr) == pytest.approx(expected, rel=1e-13)


def test_conditional_mean_rejects_nonfinite():
    with pytest.raises(InvalidInputError):
        cons.conditional_mean(cons.bpsk(), y=float("nan"), snr=1.0)
    with pytest.raises(InvalidInputError):
        cons.conditional_mean(cons.bpsk(), y=0.0, snr=float("inf"))


def test_conditional_mean_high_snr_no_overflow():
    c = cons.pam(32)
    val = cons.conditional_mean(c, y=50.0, snr=1e4)
    assert np.isfinite(val)
    assert abs(val) <= abs(c.points).max()


# ---------------------------------------------------------------------------
# mmse
# ---------------------------------------------------------------------------

def test_mmse_gaussian_closed_form():
    assert cons.mmse_exact(cons.gaussian(), 1.0) == pytest.approx(0.5, abs=1e-15)


def test_mmse_bpsk_at_zero_snr():
    assert cons.mmse_exact(cons.bpsk(), 0.0) == pytest.approx(1.0, abs=1e-15)


def test_mmse_bpsk_against_monte_carlo():
    # 2e7-sample Monte Carlo oracle; quadrature must land inside its 3-sigma CI
    rng = np.random.default_rng(20240817)
    n = 20_000_000
    x = rng.choice([-1.0, 1.0], size=n)
    y = x + rng.standard_normal(n)
    err = (x - np.tanh(y)) ** 2
    mc, ci = float(err.mean()), 3.0 * float(err.std()) / math.sqrt(n)
    assert abs(cons.mmse_exact(cons.bpsk(), 1.0) - mc) < ci


def test_mmse_negative_snr_rejected():
    with pytest.raises(InvalidInputError):
        cons.mmse_exact(cons.bpsk(), -0.5)


# ---------------------------------------------------------------------------
# mmse derivative
# ---------------------------------------------------------------------------

def test_derivative_gaussian_closed_form():
    assert cons.mmse_derivative(cons.gaussian(), 1.0) == pytest.approx(-0.25, abs=1e-15)


def test_derivative_bpsk_at_zero_snr():
    assert cons.mmse_derivative(cons.bpsk(), 0.0) == pytest.approx(-1.0, abs=1e-15)


def test_derivative_16pam_matches_finite_difference():
    c = cons.pam(16)
    h = 1e-4
    fd = (cons.mmse_exact(c, 3.0 + h) - cons.mmse_exact(c, 3.0 - h)) / (2 * h)
    assert abs(cons.mmse_derivative(c, 3.0) - fd) < 1e-5


@pytest.mark.parametrize("name", FINITE)
def test_derivative_sign_and_fd_match_on_grid(name):
    c = cons.by_name(name)
    h = 1e-4
    for snr in np.geomspace(0.05, 20.0, 20):
        d = cons.mmse_derivative(c, float(snr))
        assert d <= 0.0
        fd = (cons.mmse_exact(c, float(snr) + h) - cons.mmse_exact(c, float(snr) - h)) / (2 * h)
        assert abs(d - fd) < 1e-5


# ---------------------------------------------------------------------------
# mutual information
# ---------------------------------------------------------------------------

def test_mi_gaussian_closed_form():
    assert cons.mutual_information(cons.gaussian(), 3.0) == pytest.approx(1.0, abs=1e-15)


def test_mi_bpsk_saturates():
    assert cons.mutual_information(cons.bpsk(), 400.0) == pytest.approx(1.0, abs=1e-6)


def test_mi_4pam_i_mmse_relation():
    # dI/dsnr in nats equals mmse/2 (centered difference, step 1e-4)
    c = cons.pam(4)
    h = 1e-4
    fd = (
        (cons.mutual_information(c, 2.0 + h) - cons.mutual_information(c, 2.0 - h))
        / (2 * h)
        * math.log(2.0)
    )
    assert abs(fd - 0.5 * cons.mmse_exact(c, 2.0)) < 1e-5


@pytest.mark.parametrize("name", FINITE)
def test_mi_bounded_by_gaussian_and_cardinality(name):
    c = cons.by_name(name)
    cap = c.max_information_bits()
    for snr in np.geomspace(0.01, 300.0, 12):
        mi = cons.mutual_information(c, float(snr))
        assert -1e-12 <= mi <= 0.5 * math.log2(1.0 + snr) + 1e-9
        assert mi <= cap + 1e-12


def test_mi_monotone_in_snr():
    c = cons.pam(4)
    vals = [cons.mutual_information(c, s) for s in np.geomspace(0.01, 100.0, 15)]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# property tests on random symmetric constellations
# ---------------------------------------------------------------------------

@st.composite
def symmetric_constellations(draw):
    half = draw(
        st.lists(
            st.floats(min_value=0.05, max_value=3.0, allow_nan=False),
            min_size=1,
            max_size=4,
            unique=True,
        )
    )
    pts = np.sort(np.array([-x for x in half] + half))
    if np.any(np.diff(pts) < 1e-6):
        pts = np.arange(-len(half), len(half) + 1e-9)
        pts = pts[pts != 0] if len(half) > 1 else np.array([-1.0, 1.0])
    probs = np.full(pts.size, 1.0 / pts.size)
    pts = pts / math.sqrt(np.sum(probs * pts**2))
    return cons.Constellation("discrete", pts, probs, label="hyp")


@settings(max_examples=25, deadline=None)
@given(symmetric_constellations(), st.floats(min_value=0.0, max_value=50.0))
def test_mmse_properties_random_constellations(c, snr):
    m = cons.mmse_exact(c, snr, check=False)
    assert 0.0 <= m <= 1.0
    assert cons.mmse_exact(c, 0.0) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    symmetric_constellations(),
    st.floats(min_value=-20.0, max_value=20.0),
    st.floats(min_value=0.0, max_value=100.0),
)
def test_conditional_mean_bounded(c, y, snr):
    v = cons.conditional_mean(c, y, snr)
    assert c.points.min() - 1e-12 <= v <= c.points.max() + 1e-12
