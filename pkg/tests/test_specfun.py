import mpmath
import numpy as np
import pytest

from helmcond.specfun import (
    EULER_GAMMA,
    bessel_j,
    bessel_y,
    hankel0_log_split,
    hankel1,
    y0_regular,
)

SAMPLES = [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.0, 3.7, 8.0, 15.0, 30.0]


@mpmath.workdps(40)
def _series_j(n, x):
    # ascending series, summed in high precision
    x = mpmath.mpf(x)
    term = (x / 2) ** n / mpmath.factorial(n)
    total = mpmath.mpf(0)
    m = 0
    while True:
        total += term
        m += 1
        term *= -((x / 2) ** 2) / (m * (m + n))
        if abs(term) < mpmath.mpf(10) ** -35 * max(1, abs(total)) and m > x:
            return total


@pytest.mark.parametrize("n", [0, 1])
@pytest.mark.parametrize("x", SAMPLES)
def test_bessel_j_matches_series(n, x):
    ref = float(_series_j(n, x))
    assert bessel_j(n, x) == pytest.approx(ref, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("n", [0, 1])
@pytest.mark.parametrize("x", SAMPLES)
def test_bessel_y_matches_mpmath(n, x):
    with mpmath.workdps(40):
        ref = float(mpmath.bessely(n, x))
    assert bessel_y(n, x) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_trivial_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(0, 1.0) == pytest.approx(0.7651976865579666, rel=1e-14)


def test_wronskian():
    x = np.array(SAMPLES)
    w = bessel_j(1, x) * bessel_y(0, x) - bessel_j(0, x) * bessel_y(1, x)
    np.testing.assert_allclose(w, 2.0 / (np.pi * x), rtol=1e-12)


def test_recurrence():
    x = np.linspace(0.3, 40.0, 50)
    j2 = bessel_j(2, x)
    np.testing.assert_allclose(j2, 2.0 / x * bessel_j(1, x) - bessel_j(0, x), atol=1e-13)
    y2 = bessel_y(2, x)
    np.testing.assert_allclose(y2, 2.0 / x * bessel_y(1, x) - bessel_y(0, x), rtol=1e-11)


def test_hankel_combination():
    x = np.array(SAMPLES)
    np.testing.assert_allclose(hankel1(0, x), bessel_j(0, x) + 1j * bessel_y(0, x), rtol=1e-13)
    np.testing.assert_allclose(hankel1(1, x), bessel_j(1, x) + 1j * bessel_y(1, x), rtol=1e-13)
    assert isinstance(hankel1(0, 1.0), complex)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan])
def test_hankel_domain(bad):
    with pytest.raises(ValueError):
        hankel1(0, bad)


def test_hankel_order():
    with pytest.raises(ValueError):
        hankel1(2, 1.0)


def test_small_argument_log_bound():
    t = np.geomspace(1e-10, 1.0, 400)
    gap = np.abs(hankel1(0, t) - 2j / np.pi * np.log(t))
    assert np.all(gap < 1.03)
    # limit of the gap is |1 + (2i/pi)(gamma - log 2)|
    lim = abs(1 + 2j / np.pi * (EULER_GAMMA - np.log(2.0)))
    assert gap[0] == pytest.approx(lim, abs=1e-8)


def test_modulus_bound():
    t = np.geomspace(1e-6, 1e3, 800)
    assert np.all(np.abs(hankel1(0, t)) <= np.sqrt(2.0 / (np.pi * t)))


def test_y0_split_continuous_and_correct():
    x = np.array([0.0, 1e-8, 0.5, 1.999999, 2.0, 2.000001, 5.0])
    reg = y0_regular(x)
    assert reg[0] == pytest.approx(2 / np.pi * (EULER_GAMMA - np.log(2)), rel=1e-15)
    assert reg[3] == pytest.approx(reg[5], abs=1e-5)
    xp = x[1:]
    np.testing.assert_allclose(reg[1:] + 2 / np.pi * bessel_j(0, xp) * np.log(xp), bessel_y(0, xp), rtol=1e-13, atol=1e-15)
    h = hankel0_log_split(xp) + 2j / np.pi * bessel_j(0, xp) * np.log(xp)
    np.testing.assert_allclose(h, hankel1(0, xp), rtol=1e-13)
