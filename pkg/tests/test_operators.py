import math

import mpmath
import numpy as np
import pytest
from scipy import special

from helmcond.geometry import ShapeSpec, make_shape, mesh, mesh_from_counts
from helmcond.operators import (
    GalerkinMatrix,
    OperatorError,
    OperatorKind,
    assemble,
    assemble_laplace_limit,
    assemble_layers,
    combine_A,
    kernel_D,
    kernel_D0,
    kernel_Dprime,
    kernel_S,
    kernel_S0,
    kernel_S_diagonal_constant,
    kernel_S_smooth,
    load_matrix,
    rank_one_T,
    save_matrix,
)
from helmcond.quadrature import QuadratureConfig
from helmcond.spectral import circle_fourier_reference, op_norm, singular_extremes


def shape_mesh(kind, k, eppw=10.0, min_per_arc=1, **params):
    return mesh(make_shape(ShapeSpec.named(kind, **params)), k, eppw, min_per_arc)


@pytest.fixture(scope="module")
def kite_layers():
    msh = shape_mesh("kite", 5.0)
    return msh, assemble_layers(msh, 5.0, want=("S", "D", "Dprime"))


@pytest.fixture(scope="module")
def square_layers():
    msh = shape_mesh("square", 5.0)
    return msh, assemble_layers(msh, 5.0, want=("S", "D", "Dprime"))


# -- pointwise kernels -------------------------------------------------------------------


def test_kernel_S_unit_distance():
    val = kernel_S([0.0, 0.0], [0.6, 0.8], 1.0)
    assert val == pytest.approx(0.5j * (special.j0(1.0) + 1j * special.y0(1.0)), rel=1e-15)


def test_kernel_S_symmetric_and_singular():
    x, y = np.array([0.3, -0.2]), np.array([1.1, 0.4])
    assert kernel_S(x, y, 3.0) == kernel_S(y, x, 3.0)
    with pytest.raises(OperatorError):
        kernel_S(x, x, 3.0)


def test_kernel_S0_value():
    assert kernel_S0([0, 0], [0, 2.0], R0=1.0) == pytest.approx(-math.log(2.0) / math.pi)


def test_kernel_S_low_k_approaches_laplace_plus_constant():
    # S_k - S_0 -> -(1/pi)(log(k/2) + gamma) + i/2, independent of x, y
    x, y = np.array([0.0, 0.0]), np.array([0.3, 0.1])
    for k in (1e-4, 1e-6):
        diff = kernel_S(x, y, k) - kernel_S0(x, y, 1.0)
        assert diff == pytest.approx(kernel_S_diagonal_constant(k), abs=10 * k)


def test_kernel_S_smooth_continuous():
    x = np.array([0.0, 0.0])
    for k in (0.5, 5.0):
        near = kernel_S_smooth(x, [1e-7, 0.0], k)
        assert near == pytest.approx(kernel_S_diagonal_constant(k), abs=1e-6)
        far = kernel_S_smooth(x, [0.3, 0.4], k)
        assert far == pytest.approx(kernel_S(x, [0.3, 0.4], k) + math.log(0.5) / math.pi, rel=1e-13)


def test_kernel_D_vanishes_on_line():
    n = np.array([0.0, 1.0])
    assert kernel_D([0.0, 0.0], [2.5, 0.0], n, 0.0, 4.0) == 0
    assert kernel_D0([0.0, 0.0], [2.5, 0.0], n, 0.0) == 0


def test_kernel_Dprime_swaps_roles():
    x, y = np.array([0.1, 0.7]), np.array([-0.4, 0.2])
    nx = np.array([0.6, 0.8])
    assert kernel_Dprime(x, y, nx, 0.0, 2.0) == kernel_D(y, x, nx, 0.0, 2.0)


def test_kernel_D_circle_diagonal_limit():
    # on the unit circle the kernel tends to -1/(2 pi) as y -> x for every k
    x = np.array([1.0, 0.0])
    for k in (0.1, 5.0):
        t = 1e-4
        y = np.array([math.cos(t), math.sin(t)])
        approach = kernel_D(x, y, y, 1.0, k)
        limit = kernel_D(x, x, x, 1.0, k)
        assert limit == pytest.approx(-1 / (2 * math.pi))
        assert approach.real == pytest.approx(limit.real, abs=1e-6)


def test_kernel_D_sign_matches_circle_oracle():
    # constant mode: the double-layer eigenvalue on the unit circle at small k is near -1
    ref = circle_fourier_reference(1e-3, 1.0, n_max=4)
    assert ref.eig_D[0].real == pytest.approx(-1.0, abs=1e-3)
    assert kernel_D0([1.0, 0.0], [0.0, 1.0], [0.0, 1.0], 1.0) == pytest.approx(-1 / (2 * math.pi))


# -- Galerkin entries against independent quadrature ----------------------------------------


def test_laplace_self_entry_straight_element():
    # (1/h) int int (1/pi) log(1/|s-t|) ds dt over [0,h]^2 = (h/pi)(3/2 - log h)
    msh = shape_mesh("square", 1.0, min_per_arc=8)
    s0 = assemble(OperatorKind("S0", R0=1.0), msh).entries
    h = msh.lengths[0]
    exact = h / math.pi * (1.5 - math.log(h))
    np.testing.assert_allclose(s0.diagonal().real, exact, rtol=1e-9)


def test_laplace_corner_entry():
    # perpendicular elements touching at a square corner
    msh = shape_mesh("square", 1.0, min_per_arc=4)
    s0 = assemble(OperatorKind("S0", R0=1.0), msh).entries
    h = msh.lengths[0]
    ends = msh.endpoints
    i = 3  # last element of the first side
    j = 4  # first element of the second side
    np.testing.assert_allclose(ends[i, 1], ends[j, 0], atol=1e-14)
    f = lambda s, t: mpmath.log(1 / mpmath.sqrt(s * s + t * t)) / mpmath.pi  # noqa: E731
    with mpmath.workdps(20):
        ref = float(mpmath.quad(f, [0, h], [0, h])) / h
    assert s0[i, j].real == pytest.approx(ref, rel=1e-9)


def test_helmholtz_far_entry_against_dense_gauss():
    msh = shape_mesh("circle", 5.0)
    S = assemble(OperatorKind("S", k=5.0), msh).entries
    i, j = 0, 25
    x, w = np.polynomial.legendre.leggauss(40)
    t0, t1 = 2 * np.pi * msh.s_start, 2 * np.pi * msh.s_end
    ti = t0[i] + (t1[i] - t0[i]) * (x + 1) / 2
    tj = t0[j] + (t1[j] - t0[j]) * (x + 1) / 2
    wi = w * (t1[i] - t0[i]) / 2
    wj = w * (t1[j] - t0[j]) / 2
    pi = np.stack([np.cos(ti), np.sin(ti)], -1)
    pj = np.stack([np.cos(tj), np.sin(tj)], -1)
    vals = kernel_S(pi[:, None, :], pj[None, :, :], 5.0)
    ref = wi @ vals @ wj / math.sqrt(msh.lengths[i] * msh.lengths[j])
    assert S[i, j] == pytest.approx(ref, rel=1e-10)


# -- structure ---------------------------------------------------------------------------------


@pytest.mark.parametrize("fixture", ["kite_layers", "square_layers"])
def test_S_complex_symmetric(fixture, request):
    _, lay = request.getfixturevalue(fixture)
    S = lay["S"]
    assert np.abs(S - S.T).max() <= 1e-8 * np.abs(S).max()


@pytest.mark.parametrize("fixture", ["kite_layers", "square_layers"])
def test_Dprime_is_D_transpose(fixture, request):
    _, lay = request.getfixturevalue(fixture)
    D, Dp = lay["D"], lay["Dprime"]
    assert np.abs(Dp - D.T).max() <= 1e-8 * np.abs(D).max()


def test_A_linearity(kite_layers):
    msh, lay = kite_layers
    A = assemble(OperatorKind("A", k=5.0, eta=5.0), msh).entries
    np.testing.assert_allclose(A, np.eye(msh.n) + lay["D"] - 5j * lay["S"], atol=1e-14)


def test_Aprime_same_singular_values(kite_layers):
    msh, lay = kite_layers
    A = combine_A(lay["S"], lay["D"], 5.0)
    Ap = combine_A(lay["S"], lay["Dprime"], 5.0)
    sa, sp = singular_extremes(A), singular_extremes(Ap)
    assert sp[0] == pytest.approx(sa[0], rel=1e-8)
    assert sp[1] == pytest.approx(sa[1], rel=1e-8)


def test_zero_kernel_gives_identity():
    msh = shape_mesh("circle", 5.0)
    zero = np.zeros((msh.n, msh.n), dtype=complex)
    A = combine_A(zero, zero, 5.0)
    np.testing.assert_array_equal(A, np.eye(msh.n))
    assert op_norm(A) == pytest.approx(1.0)


def test_T_rank_one():
    msh = shape_mesh("kite", 3.0)
    T = assemble(OperatorKind("T"), msh).entries
    root = np.sqrt(msh.lengths)
    np.testing.assert_allclose(T, np.outer(root, root))
    assert op_norm(T) == pytest.approx(msh.total_length, rel=1e-12)
    assert np.linalg.matrix_rank(T) == 1


def test_straight_sides_have_zero_D_blocks(square_layers):
    msh, lay = square_layers
    D = lay["D"]
    for a in range(4):
        sel = np.flatnonzero(msh.arc_id == a)
        assert np.all(D[np.ix_(sel, sel)] == 0)


def test_open_arc_rejects_double_layer():
    msh = shape_mesh("crack", 5.0)
    for name in ("D", "Dprime", "A", "D0"):
        kind = OperatorKind(name, k=5.0, eta=5.0)
        with pytest.raises(OperatorError):
            assemble(kind, msh)
    assert assemble(OperatorKind("S", k=5.0), msh).n == msh.n


def test_operator_kind_validation():
    with pytest.raises(OperatorError):
        OperatorKind("S", k=0.0)
    with pytest.raises(OperatorError):
        OperatorKind("A", k=1.0)
    with pytest.raises(OperatorError):
        OperatorKind("Q")


@pytest.mark.parametrize("kind", ["circle", "kite", "square", "rect_cavity"])
def test_quadrature_doubling_stable(kind):
    k = 5.0
    msh = shape_mesh(kind, k)
    base = QuadratureConfig()
    a = assemble_layers(msh, k, base, want=("S", "D"))
    b = assemble_layers(msh, k, base.doubled(), want=("S", "D"))
    for name in ("S", "D"):
        scale = np.abs(b[name]).max()
        assert np.abs(a[name] - b[name]).max() <= base.target * scale


def test_matrix_dump_round_trip(tmp_path):
    msh = shape_mesh("circle", 2.0)
    gm = assemble(OperatorKind("A", k=2.0, eta=2.0), msh)
    path = tmp_path / "A.mtx"
    save_matrix(path, gm)
    back = load_matrix(path)
    np.testing.assert_array_equal(back, gm.entries)
    head = path.read_text().splitlines()[:2]
    assert head[0].startswith("%%MatrixMarket matrix array complex general")
    assert "kind=A" in head[1]


def test_galerkin_transpose():
    msh = shape_mesh("circle", 2.0)
    gm = assemble(OperatorKind("D", k=2.0), msh)
    assert isinstance(gm, GalerkinMatrix)
    np.testing.assert_array_equal(gm.transpose().entries, gm.entries.T)


def test_rank_one_helper_matches_kind():
    msh = shape_mesh("square", 2.0)
    np.testing.assert_array_equal(rank_one_T(msh), assemble(OperatorKind("T"), msh).entries)


def test_laplace_limit_decreases():
    from helmcond.bounds import EtaStrategy, laplace_c0

    msh = mesh_from_counts(make_shape(ShapeSpec.named("square")), [20] * 4)
    R0 = math.sqrt(2)
    rule = EtaStrategy("eta_star_2d", R0)
    diffs = assemble_laplace_limit(msh, rule, [1e-2, 1e-5], laplace_c0(rule, R0), R0)
    assert diffs[1] < diffs[0]


def test_constant_eta_norm_grows_at_low_k():
    msh = mesh_from_counts(make_shape(ShapeSpec.named("square")), [20] * 4)
    norms = []
    for k in (1e-2, 1e-4, 1e-6):
        lay = assemble_layers(msh, k, want=("S", "D"))
        norms.append(op_norm(combine_A(lay["S"], lay["D"], 1.0)))
    assert norms[0] < norms[1] < norms[2]
    # |log k| growth: increments per factor 100 in k roughly equal
    assert (norms[2] - norms[1]) == pytest.approx(norms[1] - norms[0], rel=0.2)
