import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeloc import kedge

from oracles import quad_complex, quadrature_loss

# 30-digit references (mpmath.fresnelc / fresnels), frozen
FRESNEL_REF = {
    0.5: (0.492344225871446392878843665157, 0.0647324328599992776114805122306),
    1.0: (0.779893400376822829474206413653, 0.438259147390354766076756696625),
    2.5: (0.457413009641777045245656104956, 0.619181755819592936113576239799),
    4.0: (0.498426033038177615530709586825, 0.420515754246928424445343140743),
    6.0: (0.499531467855501120188279903271, 0.446960761236930277623920287841),
    10.0: (0.499898694205515723614151847736, 0.468169978584882240403351110810),
    -3.0: (-0.605720789297685629556161074287, -0.496312998967375036097612265299),
}
LOSS_REF = {
    1.0: 0.202672455523026590077548410991,
    -1.0: 1.12215358663371512075064376420,
    3.0: 0.0748013344344210810551254443991,
}


@pytest.fixture(scope="module")
def oracle():
    return quadrature_loss(np.linspace(-10, 10, 2001))


def test_oracle_sanity():
    # the oracle integral over [0, inf) must be (1 - j)/2
    _, L0 = quadrature_loss([0.0])
    assert abs(L0[0] - 0.5 * (1 + 1j) * (0.5 - 0.5j)) < 1e-11


def test_fresnel_zero():
    p = kedge.fresnel_cs(0.0)
    assert p.c_val == 0.0 and p.s_val == 0.0


def test_fresnel_limit_at_50():
    # as stated for the operation; S(50) = 0.49363 (ripple 1/(pi x) = 6.4e-3), so the
    # S half cannot hold for any correct evaluator
    p = kedge.fresnel_cs(50.0)
    assert abs(p.c_val - 0.5) < 1e-3 and abs(p.s_val - 0.5) < 1e-3


def test_fresnel_large_x_reference():
    # mpmath at x=50: C = 0.49999918943..., S = 0.49363380258...
    p = kedge.fresnel_cs(50.0)
    assert abs(p.c_val - 0.499999189430727967955810163982) < 1e-12
    assert abs(p.s_val - 0.493633802585938741453268239799) < 1e-12
    for x in (50.0, 200.0, 1e3):
        q = kedge.fresnel_cs(x)
        bound = 1.0 / (math.pi * x) + 1e-12
        assert abs(q.c_val - 0.5) <= bound and abs(q.s_val - 0.5) <= bound


@pytest.mark.parametrize("x", sorted(FRESNEL_REF))
def test_fresnel_reference_values(x):
    p = kedge.fresnel_cs(x)
    c_ref, s_ref = FRESNEL_REF[x]
    assert abs(p.c_val - c_ref) < 1e-8
    assert abs(p.s_val - s_ref) < 1e-8


def test_fresnel_one_vs_quadrature():
    ref = quad_complex(0.0, 1.0)
    p = kedge.fresnel_cs(1.0)
    assert abs(p.c_val - ref.real) < 1e-8
    assert abs(p.s_val + ref.imag) < 1e-8


def test_fresnel_regime_boundaries_continuous():
    # the evaluator switches method at 2.5 and 6; no jump across the switch
    for x in (kedge.SERIES_MAX, kedge.ASYMPTOTIC_MIN):
        for eps in (1e-12, 1e-9):
            lo = kedge.fresnel_complex(x - eps)
            hi = kedge.fresnel_complex(x + eps)
            assert abs(hi - lo) < 1e-8


def test_fresnel_dense_vs_quadrature():
    xs = np.linspace(0, 12, 121)
    vals = kedge.fresnel_complex(xs)
    cum = 0.0
    prev = 0.0
    for x, v in zip(xs, vals):
        cum += quad_complex(prev, x)
        prev = x
        assert abs(v.real - cum.real) < 1e-8 and abs(v.imag + cum.imag) < 1e-8


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_fresnel_odd_and_bounded(x):
    p, m = kedge.fresnel_cs(x), kedge.fresnel_cs(-x)
    assert m.c_val == -p.c_val and m.s_val == -p.s_val
    assert abs(p.c_val) <= 0.9 and abs(p.s_val) <= 0.9


def test_fresnel_rejects_nonfinite():
    with pytest.raises(ValueError):
        kedge.fresnel_cs(float("nan"))


def test_loss_at_zero_is_half():
    L = kedge.diffraction_loss(0.0)
    assert abs(abs(L) - 0.5) < 1e-15
    assert 20 * math.log10(abs(L)) == pytest.approx(-6.0206, abs=1e-4)


def test_loss_lit_limit():
    assert abs(abs(kedge.diffraction_loss(-20.0)) - 1.0) <= 0.02


@pytest.mark.parametrize("nu", sorted(LOSS_REF))
def test_loss_reference_values(nu):
    assert abs(abs(kedge.diffraction_loss(nu)) - LOSS_REF[nu]) < 1e-8


def test_loss_one_vs_quadrature():
    _, L = quadrature_loss([1.0])
    assert abs(kedge.diffraction_loss(1.0) - L[0]) < 1e-8


def test_loss_matches_quadrature_dense(oracle):
    nus, ref = oracle
    err = np.abs(kedge.diffraction_loss(nus) - ref)
    assert err.max() < 1e-8


def test_loss_strictly_decreasing_for_positive_nu():
    mag = np.abs(kedge.diffraction_loss(np.arange(0, 40.0, 0.005)))
    assert np.all(np.diff(mag) < 0)


def test_loss_vanishes_and_ripple_decays():
    assert abs(kedge.diffraction_loss(1e4)) < 1e-4
    ripple = [np.ptp(np.abs(kedge.diffraction_loss(np.linspace(-a - 5, -a, 2000))) - 1)
              for a in (10.0, 100.0)]
    assert ripple[1] < ripple[0] / 5


def test_fresnel_param_reference_geometry():
    nu = kedge.fresnel_param(25.0, 5000.0, 3.2, 0.8, 343.0)
    assert nu == pytest.approx(1.8847784313075013, rel=1e-12)
    assert nu == pytest.approx(1.885, abs=5e-4)


def test_fresnel_param_zero_theta():
    f = np.array([100.0, 1e3, 1e4])
    np.testing.assert_array_equal(kedge.fresnel_param(0.0, f, 3.2, 0.8), 0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-60, 60), st.floats(10, 2e4), st.floats(0.1, 10), st.floats(0.1, 10),
       st.floats(0.1, 4))
def test_fresnel_param_scaling(theta, f, d1, d2, k):
    nu = kedge.fresnel_param(theta, f, d1, d2)
    assert kedge.fresnel_param(theta, 4 * f, d1, d2) == pytest.approx(2 * nu, rel=1e-12,
                                                                      abs=1e-300)
    assert kedge.fresnel_param(k * theta, f, d1, d2) == pytest.approx(k * nu, rel=1e-12,
                                                                      abs=1e-300)


def test_fresnel_param_rejects_bad_geometry():
    with pytest.raises(ValueError):
        kedge.fresnel_param(10.0, 1000.0, 0.0, 0.8)
    with pytest.raises(ValueError):
        kedge.fresnel_param(10.0, -1.0, 3.2, 0.8)


FREQS = np.arange(500.0, 9001.0, 50.0)


def test_loss_curve_flat_at_zero():
    curve = kedge.loss_curve(0.0, 3.2, 0.8, FREQS)
    assert np.all(np.abs(curve.loss - 0.5) < 1e-15)


@pytest.mark.parametrize("theta", [1.0, 5.0, 20.0, 35.0])
def test_loss_curve_decreasing_in_frequency(theta):
    curve = kedge.loss_curve(theta, 3.2, 0.8, FREQS)
    assert np.all(np.diff(curve.loss) < 0)
    # the same curve through the quadrature oracle
    nus = kedge.fresnel_param(theta, FREQS[::17], 3.2, 0.8)
    _, ref = quadrature_loss(nus)
    np.testing.assert_allclose(curve.loss[::17], np.abs(ref), rtol=0, atol=1e-8)


def test_loss_curves_5_and_35_never_cross():
    lo = kedge.loss_curve(5.0, 3.2, 0.8, FREQS).loss
    hi = kedge.loss_curve(35.0, 3.2, 0.8, FREQS).loss
    assert np.all(hi < lo)


def test_loss_curve_db_and_bounds():
    curve = kedge.loss_curve(-10.0, 3.2, 0.8, FREQS)
    assert np.all((curve.loss > 0) & (curve.loss <= 1.2))
    np.testing.assert_allclose(curve.loss_db, 20 * np.log10(curve.loss))


def test_ratio_zero_delta():
    r = kedge.ratio_curve(10.0, 0.0, 3.2, 0.8, FREQS)
    np.testing.assert_array_equal(r.ratio_db, 0.0)


def test_ratio_positive_and_increasing():
    f = np.arange(1000.0, 9001.0, 50.0)
    r = kedge.ratio_curve(5.0, 25.0, 3.2, 0.8, f)
    assert np.all(r.ratio_db > 0)
    assert np.all(np.diff(r.ratio_db) > 0)


def test_ratio_curves_distinct():
    f = np.arange(4000.0, 9001.0, 50.0)
    a = kedge.ratio_curve(5.0, 25.0, 3.2, 0.8, f).ratio_db
    b = kedge.ratio_curve(15.0, 25.0, 3.2, 0.8, f).ratio_db
    assert np.max(np.abs(a - b)) >= 1.0


def test_ratio_is_loss_db_difference():
    a = kedge.loss_curve(12.0, 3.1, 0.8, FREQS)
    b = kedge.loss_curve(37.0, 3.1, 0.8, FREQS)
    r = kedge.ratio_curve(12.0, 25.0, 3.1, 0.8, FREQS)
    np.testing.assert_allclose(r.ratio_db, a.loss_db - b.loss_db, atol=1e-12)
    assert np.all(np.isfinite(r.ratio_db))
