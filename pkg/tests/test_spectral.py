import numpy as np
import pytest
from scipy import special

from helmcond.geometry import ShapeSpec, make_shape, mesh
from helmcond.operators import assemble_layers, combine_A, rank_one_T
from helmcond.spectral import (
    NormReport,
    SingularMatrixError,
    circle_fourier_reference,
    combined_report,
    eoc_p,
    inv_norm,
    near_singular,
    op_norm,
    singular_extremes,
)


@pytest.fixture(scope="module")
def circle5():
    msh = mesh(make_shape(ShapeSpec.named("circle")), 5.0)
    lay = assemble_layers(msh, 5.0, want=("S", "D"))
    return msh, lay


def test_identity_norms():
    eye = np.eye(6)
    assert op_norm(eye) == pytest.approx(1.0)
    assert inv_norm(eye) == pytest.approx(1.0)


def test_diag_norms():
    M = np.diag([1.0, 2.0j])
    assert op_norm(M) == pytest.approx(2.0)
    assert inv_norm(M) == pytest.approx(1.0)


def test_T_norm_circle(circle5):
    msh, _ = circle5
    assert op_norm(rank_one_T(msh)) == pytest.approx(2 * np.pi, rel=1e-9)


def test_singular_raises():
    with pytest.raises(SingularMatrixError):
        inv_norm(np.zeros((3, 3)))


def test_non_square_and_nonfinite():
    with pytest.raises(ValueError):
        op_norm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        op_norm(np.array([[np.nan]]))


def test_invariances():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((30, 30)) + 1j * rng.standard_normal((30, 30))
    smax, smin = singular_extremes(M)
    assert singular_extremes(M.T) == pytest.approx((smax, smin), rel=1e-12)
    assert singular_extremes(3 * M) == pytest.approx((3 * smax, 3 * smin), rel=1e-12)
    q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    assert singular_extremes(q @ M) == pytest.approx((smax, smin), rel=1e-10)


def test_iterative_path_agrees(monkeypatch):
    import helmcond.spectral as sp

    rng = np.random.default_rng(2)
    M = np.eye(60) * 3 + 0.3 * (rng.standard_normal((60, 60)) + 1j * rng.standard_normal((60, 60)))
    dense = singular_extremes(M)
    monkeypatch.setattr(sp, "DENSE_SVD_LIMIT", 10)
    iterative = sp.singular_extremes(M)
    assert iterative == pytest.approx(dense, rel=1e-7)


def test_circle_inverse_norm(circle5):
    _, lay = circle5
    A = combine_A(lay["S"], lay["D"], 5.0)
    assert inv_norm(A) == pytest.approx(0.986, rel=0.02)


def test_circle_oracle_closed_form():
    # S: i pi J_n H_n;  D: (i pi k / 2)(J_n H_n)'
    k = 5.0
    ref = circle_fourier_reference(k, k)
    n = ref.orders
    jn, hn = special.jv(n, k), special.hankel1(n, k)
    np.testing.assert_allclose(ref.eig_S, 1j * np.pi * jn * hn, atol=1e-12)
    jp, hp = special.jvp(n, k), special.h1vp(n, k)
    eig_d = 0.5j * np.pi * k * (jp * hn + jn * hp)
    np.testing.assert_allclose(ref.eig_D, eig_d, atol=1e-11)
    # equivalently 1 + i pi k J_n H_n' (Wronskian)
    np.testing.assert_allclose(ref.eig_D, 1 + 1j * np.pi * k * jn * hp, atol=1e-11)


def test_circle_oracle_sup(circle5):
    _, lay = circle5
    ref = circle_fourier_reference(5.0, 5.0)
    assert not ref.truncated
    assert ref.sup == pytest.approx(2.663, rel=0.015)
    assert op_norm(combine_A(lay["S"], lay["D"], 5.0)) == pytest.approx(ref.sup, rel=0.015)


def test_circle_oracle_truncation_flag():
    assert circle_fourier_reference(40.0, 40.0, n_max=5).truncated


def test_circle_zero_eta_invertible():
    ref = circle_fourier_reference(5.3, 0.0)
    assert ref.inf > 0


def test_eoc_examples():
    assert eoc_p(320, 3.076e-2, 640, 1.935e-2) == pytest.approx(-0.67, abs=0.005)
    assert eoc_p(7.0, 3.0, 14.0, 3.0) == 0.0
    assert eoc_p(10, 2, 20, 4) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        eoc_p(5, 1, 5, 2)
    with pytest.raises(ValueError):
        eoc_p(5, -1, 10, 2)


def test_near_singular_flag():
    assert near_singular(1.0, 1e-15)
    assert not near_singular(1.0, 1e-3)
    rep = combined_report("x", 1.0, "eta_k", 1.0, None, None, np.diag([1.0, 1e-16]))
    assert rep.flags == ("near_singular",)


def test_report_dict_columns():
    rep = NormReport("circle", 5.0, "eta_k", 5.0, 50, 0.5, 1.1, 2.6, 0.98, eoc={"norm_S": -0.7})
    d = rep.as_dict()
    assert d["cond"] == pytest.approx(2.6 * 0.98)
    assert d["p_norm_S"] == -0.7
    assert list(d)[:5] == ["shape", "k", "eta_strategy", "eta", "N"]
    assert NormReport("crack", 5.0, None, None, 8, 0.3).cond is None
