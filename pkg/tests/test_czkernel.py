import math

import numpy as np
import pytest

from jnlab.lattice import Cube, GridFunction, Window
from jnlab.spaces import NormParams
from jnlab.czkernel import (
    CorrectionSpec,
    KernelSpec,
    apply_cz,
    apply_modified,
    apply_truncated,
    hilbert_kernel,
    kernel_by_name,
    kernel_transpose,
    modified_on_monomial,
    perturbed_kernel,
    poly_distance,
    riesz_kernel,
    smooth_bump_kernel,
    standard_kernel_check,
    vanishing_moment_defect,
)
from jnlab.hardy import make_atom


def sample_pairs(n, count=100, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(count, n))
    y = rng.uniform(-2, 2, size=(count, n))
    keep = np.linalg.norm(x - y, axis=1) > 0.1
    return x[keep], y[keep]


def test_transpose_hilbert_antisymmetric():
    K = hilbert_kernel()
    Kt = kernel_transpose(K)
    x, y = sample_pairs(1)
    assert np.max(np.abs(Kt.k(x, y) + K.k(x, y))) <= 1e-14
    Ktt = kernel_transpose(Kt)
    assert np.max(np.abs(Ktt.k(x, y) - K.k(x, y))) <= 1e-14
    # derivative slots swap
    assert np.allclose(Kt.d1((2,), x, y), K.d2((2,), y, x))


def test_transpose_riesz_odd():
    R = riesz_kernel(0, 2)
    Rt = kernel_transpose(R)
    x, y = sample_pairs(2)
    assert np.max(np.abs(Rt.k(x, y) + R.k(x, y))) <= 1e-14


def test_riesz_derivative_consistency():
    # closed-form first partials against central differences in the y slot
    R = riesz_kernel(1, 2)
    x, y = sample_pairs(2, count=50, seed=3)
    eps = 1e-6
    for axis, g in [(0, (1, 0)), (1, (0, 1))]:
        shift = np.zeros(2)
        shift[axis] = eps
        numeric = (R.k(x, y + shift) - R.k(x, y - shift)) / (2 * eps)
        closed = R.d2(g, x, y)
        denom = np.maximum(np.abs(closed), 1.0)
        assert np.max(np.abs(numeric - closed) / denom) <= 1e-4


def test_perturbed_derivative_consistency():
    K = perturbed_kernel()
    x, y = sample_pairs(1, count=50, seed=4)
    eps = 1e-6
    numeric = (K.k(x + eps, y) - K.k(x - eps, y)) / (2 * eps)
    closed = K.d1((1,), x, y)
    assert np.max(np.abs(numeric - closed)) <= 1e-4 * np.max(np.abs(closed))


def test_truncated_odd_cancellation():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (64,))
    one = GridFunction.from_callable(w, lambda x: np.ones_like(x))
    out = apply_truncated(K, one, 0.5, eval_points=[[0.0]])
    assert abs(out[0]) <= 1e-12


def test_truncated_linear_closed_form():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (64,))
    f = GridFunction.from_callable(w, lambda x: x)
    out = apply_truncated(K, f, 0.25, eval_points=[[0.0]])
    assert abs(out[0] + 1.5) <= 2 * w.h


def test_truncated_eta_validation():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (64,))
    f = GridFunction.from_callable(w, lambda x: x)
    with pytest.raises(ValueError):
        apply_truncated(K, f, w.h / 2)
    with pytest.raises(ValueError):
        apply_truncated(K, f, 1.37 * w.h)


def test_smooth_bump_equals_plain_quadrature():
    B = smooth_bump_kernel()
    w = Window(1, (-1.0,), (1.0,), (64,))
    rng = np.random.default_rng(1)
    f = GridFunction(w, rng.normal(size=64))
    out = apply_truncated(B, f, w.h, eval_window=w)
    pts = w.midpoints()
    direct = np.empty(64)
    for i, x in enumerate(pts):
        mask = np.abs(pts[:, 0] - x[0]) >= w.h * (1 - 1e-12)
        direct[i] = np.sum(np.exp(-((x[0] - pts[mask, 0]) ** 2)) * f.flat[mask]) * w.h
    assert np.max(np.abs(out.values - direct)) <= 1e-12
    # the excluded cell changes the plain quadrature only at the h scale
    full = np.array(
        [np.sum(np.exp(-((x[0] - pts[:, 0]) ** 2)) * f.flat) * w.h for x in pts]
    )
    assert np.max(np.abs(out.values - full)) <= 3 * w.h * np.max(np.abs(f.values))


def test_cz_zero_function():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (64,))
    res = apply_cz(K, GridFunction.zeros(w))
    assert np.all(res.result.values == 0.0)
    assert res.converged and not res.diverged


def test_cz_constant_center_cancellation():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (65,))  # odd count: 0 is a midpoint
    one = GridFunction.from_callable(w, lambda x: np.ones_like(x))
    out = apply_truncated(K, one, w.h, eval_points=[[0.0]])
    assert abs(out[0]) <= 1e-12


def test_cz_increment_slope_on_smooth_compact():
    K = hilbert_kernel()
    incs = []
    hs = []
    for cells in (128, 256, 512):
        w = Window(1, (-1.0,), (1.0,), (cells,))
        f = GridFunction.from_callable(
            w, lambda x: np.where(np.abs(x) < 0.5, np.cos(np.pi * x) ** 2, 0.0)
        )
        res = apply_cz(K, f)
        incs.append(res.max_increments[-1])
        hs.append(w.h)
    slope = np.polyfit(np.log(hs), np.log(incs), 1)[0]
    assert slope >= 0.8


def test_cz_l2_ratio_bounded():
    K = hilbert_kernel()
    w = Window(1, (-1.0,), (1.0,), (128,))
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(20):
        f = GridFunction(w, rng.normal(size=128))
        tf = apply_cz(K, f).result
        ratio = np.linalg.norm(tf.values) / np.linalg.norm(f.values)
        worst = max(worst, ratio)
    assert worst <= 2 * math.pi


def test_modified_locality():
    K = hilbert_kernel()
    Kt = kernel_transpose(K)
    w = Window(1, (-1.0,), (1.0,), (128,))
    corr = CorrectionSpec((0.0,), 0.75, 0)
    f = GridFunction.from_callable(w, lambda x: np.where(np.abs(x) < 0.5, 1.0 + x, 0.0))
    mod = apply_modified(Kt, corr, f)
    cz = apply_cz(Kt, f)
    assert np.max(np.abs(mod.result.values - cz.result.values)) <= 1e-12


def test_modified_b0_independence():
    K = hilbert_kernel()
    Kt = kernel_transpose(K)
    w = Window(1, (-1.0,), (1.0,), (256,))
    f = GridFunction.from_callable(w, lambda x: np.sin(2 * x) + (x > 0.3))
    m0 = apply_modified(Kt, CorrectionSpec((0.0,), 0.6, 0), f).result
    m1 = apply_modified(Kt, CorrectionSpec((0.2,), 0.9, 0), f).result
    scale = float(np.max(np.abs(m0.values)))
    assert poly_distance(m0 - m1, Cube((0.0,), 2.0), 0, floor=scale) <= 1e-6


def test_modified_minus_plain_is_constant():
    # order 0: the corrected and plain operators differ by a constant
    K = hilbert_kernel()
    Kt = kernel_transpose(K)
    big = Window(1, (-4.0,), (4.0,), (1024,))
    ew = Window(1, (-1.0,), (1.0,), (256,))
    f = GridFunction.from_callable(
        big, lambda x: np.exp(-3 * (x - 2.5) ** 2) + np.where(np.abs(x) < 0.5, 1.0, 0.0)
    )
    corr = CorrectionSpec((0.0,), 1.3, 0)
    diff = apply_cz(Kt, f, eval_window=ew).result - apply_modified(Kt, corr, f, eval_window=ew).result
    dev = np.max(np.abs(diff.values - diff.values.mean()))
    assert abs(diff.values.mean()) > 0.01  # genuinely nonzero constant
    assert dev <= 1e-6 * max(1.0, float(np.max(np.abs(diff.values))))


def test_modified_canonical_form():
    K = hilbert_kernel()
    Kt = kernel_transpose(K)
    w = Window(1, (-1.0,), (1.0,), (128,))
    f = GridFunction.from_callable(w, lambda x: np.sign(x) * np.minimum(np.abs(x), 0.4))
    res = apply_modified(Kt, CorrectionSpec((0.0,), 0.5, 1), f)
    # canonical representative has vanishing projection over the reference cube
    d = poly_distance(res.canonical, res.reference_cube, 1, floor=0.0)
    from jnlab.polyproj import moment_projection

    proj = moment_projection(res.canonical, res.reference_cube, 1)
    assert max(abs(c) for c in proj.coeffs.values()) <= 1e-10 * max(
        1.0, float(np.max(np.abs(res.canonical.values)))
    )


def test_monomial_image_dichotomy():
    ew = Window(1, (-1.0,), (1.0,), (128,))
    corr = CorrectionSpec((0.0,), 0.5, 0)
    img_h = modified_on_monomial(
        kernel_transpose(hilbert_kernel()), corr, (0,), ew, padding=256
    )
    d_h = poly_distance(img_h.values, Cube((0.0,), 1.0), 0, floor=1.0)
    assert d_h <= 5e-3
    assert not img_h.truncation_warn
    img_p = modified_on_monomial(
        kernel_transpose(perturbed_kernel()), corr, (0,), ew, padding=256, check_doubling=False
    )
    d_p = poly_distance(img_p.values, Cube((0.0,), 1.0), 0, floor=1.0)
    assert d_p >= 10 * d_h


def test_monomial_image_additive_in_kernel():
    ew = Window(1, (-1.0,), (1.0,), (64,))
    corr = CorrectionSpec((0.0,), 0.5, 0)
    K1 = hilbert_kernel()
    K2 = smooth_bump_kernel()
    Ksum = KernelSpec(
        "sum", 1, 0, 1.0,
        k=lambda x, y: K1.k(x, y) + K2.k(x, y),
        d1=lambda g, x, y: K1.d1(g, x, y) + K2.d1(g, x, y),
        d2=lambda g, x, y: K1.d2(g, x, y) + K2.d2(g, x, y),
    )
    a = modified_on_monomial(kernel_transpose(K1), corr, (0,), ew, padding=8, check_doubling=False)
    b = modified_on_monomial(kernel_transpose(K2), corr, (0,), ew, padding=8, check_doubling=False)
    c = modified_on_monomial(kernel_transpose(Ksum), corr, (0,), ew, padding=8, check_doubling=False)
    assert np.max(np.abs(c.values.values - a.values.values - b.values.values)) <= 1e-10


def test_monomial_image_padding_guard():
    ew = Window(1, (-1.0,), (1.0,), (32,))
    with pytest.raises(ValueError):
        modified_on_monomial(
            kernel_transpose(hilbert_kernel()), CorrectionSpec((0.0,), 0.5, 0), (0,), ew, padding=2
        )


def test_poly_distance():
    w = Window(1, (-1.0,), (1.0,), (512,))
    g = GridFunction.monomial(w, (2,))
    cube = Cube((0.0,), 2.0)
    # exact value sqrt((8/45) / (2/5)) = 2/3 for s = 1
    assert poly_distance(g, cube, 1) == pytest.approx(2.0 / 3.0, abs=5e-3)
    assert poly_distance(g, cube, 2) <= 1e-10
    lin = GridFunction.monomial(w, (1,))
    assert poly_distance(lin, cube, 1) <= 1e-10
    # monotone in s
    rng = np.random.default_rng(3)
    f = GridFunction(w, rng.normal(size=512))
    d = [poly_distance(f, cube, s) for s in range(3)]
    assert d[0] >= d[1] >= d[2]


def test_vanishing_moment_defect_dichotomy():
    params = NormParams(2.0, 2.0, 0, 0.25)
    w = Window(1, (-2.0,), (2.0,), (256,))
    cube = Cube((0.0,), 1.0)
    atoms = [make_atom(50 + i, cube, params, w) for i in range(3)]
    rep_h = vanishing_moment_defect(hilbert_kernel(), 0, atoms, padding=256)
    assert rep_h.max_defect <= 5e-3
    assert rep_h.max_mismatch <= 1e-3
    rep_p = vanishing_moment_defect(perturbed_kernel(), 0, atoms, padding=256)
    assert rep_p.max_defect >= 10 * rep_h.max_defect
    # the pairing identity holds for either kernel
    assert rep_p.max_mismatch <= 1e-3


def test_standard_kernel_check_hilbert():
    rep = standard_kernel_check(hilbert_kernel(order=2), samples=300, seed=1)
    assert rep.size[(0,)]["slot1"] == pytest.approx(1.0, abs=1e-12)
    assert rep.size[(0,)]["slot2"] == pytest.approx(1.0, abs=1e-12)
    assert rep.size[(1,)]["slot2"] == pytest.approx(1.0, abs=1e-12)  # 1! = 1
    assert np.isfinite(rep.max_regularity)


def test_standard_kernel_check_riesz():
    rep = standard_kernel_check(riesz_kernel(0, 2), samples=300, seed=2)
    assert rep.size[(0, 0)]["slot1"] <= 1.0 + 1e-12
    assert np.isfinite(rep.max_regularity)


def test_standard_kernel_check_smooth_bump():
    rep = standard_kernel_check(smooth_bump_kernel(order=2), samples=200, seed=3)
    assert np.isfinite(rep.max_size)
    assert np.isfinite(rep.max_regularity)
    # the regularity quotient decays with separation for the smooth kernel
    B = smooth_bump_kernel(order=0)
    rng = np.random.default_rng(4)
    y = rng.uniform(-0.5, 0.5, size=(200, 1))
    z = y + rng.uniform(-0.05, 0.05, size=(200, 1))
    def quotient(gap):
        x = y + gap
        d = np.abs(x[:, 0] - y[:, 0])
        return np.max(np.abs(B.k(x, y) - B.k(x, z)) * d ** (1 + B.delta)
                      / np.abs(y[:, 0] - z[:, 0]) ** B.delta)
    assert quotient(6.0) < 1e-3 * quotient(1.0)


def test_kernel_registry():
    assert kernel_by_name("hilbert").name == "hilbert"
    assert kernel_by_name("riesz", j=1, n=2).name == "riesz1"
    with pytest.raises(KeyError):
        kernel_by_name("cauchy")


def test_modified_b0_independence_2d():
    # the polynomial-difference identity holds for the planar kernel at order 1
    R = riesz_kernel(0, 2)
    Rt = kernel_transpose(R)
    w = Window(2, (-1.0, -1.0), (1.0, 1.0), (24, 24))
    f = GridFunction.from_callable(
        w, lambda x, y: np.sin(3 * x) * np.cos(2 * y) + (x + y > 0.2)
    )
    m0 = apply_modified(Rt, CorrectionSpec((0.0, 0.0), 0.6, 1), f).result
    m1 = apply_modified(Rt, CorrectionSpec((0.1, -0.1), 0.8, 1), f).result
    scale = float(np.max(np.abs(m0.values)))
    assert poly_distance(m0 - m1, Cube((0.0, 0.0), 2.0), 1, floor=scale) <= 1e-6


def test_truncated_indicator_closed_form():
    # pv integral of 1/(x - y) over [a, b] is ln|(x - a)/(x - b)| off support
    K = hilbert_kernel()
    w = Window(1, (-2.0,), (2.0,), (512,))
    a, b = -0.5, 0.25
    f = GridFunction.from_callable(w, lambda x: ((x >= a) & (x < b)).astype(float))
    xs = np.array([[1.0], [1.5], [-1.25]])
    out = apply_truncated(K, f, w.h, eval_points=xs)
    exact = np.log(np.abs((xs[:, 0] - a) / (xs[:, 0] - b)))
    assert np.max(np.abs(out - exact)) <= 5e-3


def test_cz_indicator_inside_support():
    # at interior points the principal value of the indicator is
    # ln((x - a)/(b - x)); the symmetric exclusion realizes it
    K = hilbert_kernel()
    w = Window(1, (-2.0,), (2.0,), (1024,))
    a, b = -0.5, 0.75
    f = GridFunction.from_callable(w, lambda x: ((x >= a) & (x < b)).astype(float))
    res = apply_cz(K, f)
    pts = w.midpoints()[:, 0]
    inside = (pts > a + 0.15) & (pts < b - 0.15)
    exact = np.log((pts[inside] - a) / (b - pts[inside]))
    got = res.result.flat[inside]
    assert np.max(np.abs(got - exact)) <= 2e-2


def test_vanishing_moment_defect_order_one():
    # atoms orthogonal to linears: both moment defects stay truncation-small
    params = NormParams(2.0, 2.0, 1, 0.3)
    w = Window(1, (-2.0,), (2.0,), (512,))
    cube = Cube((0.0,), 1.0)
    atoms = [make_atom(400 + i, cube, params, w) for i in range(3)]
    rep = vanishing_moment_defect(hilbert_kernel(), 1, atoms, padding=512)
    assert rep.max_defect <= 5e-3
    assert rep.max_mismatch <= 1e-3
    assert {r["gamma"] for r in rep.rows} == {(0,), (1,)}
