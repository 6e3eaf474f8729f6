import numpy as np
import pytest
from hypothesis import given, strategies as st

from hwnum import linalg as la
from hwnum.backends import BackendTag
from hwnum.containers import BandedMatrix, DenseVector, Layout, PrecisionMismatch, banded_from_bands
from oracles import dense_from_bands, kahan_sum, loop_matvec, random_q1_bands, rel

TAGS = list(BackendTag)
seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 700)


def vec(rng, n, dtype="double", positive=False):
    data = rng.random(n) if positive else rng.standard_normal(n)
    return DenseVector(data, dtype)


# -- examples -------------------------------------------------------------------

def test_axpy_examples():
    y = DenseVector([1.0, 2.0])
    la.axpy(y, 0.0, DenseVector([5.0, 5.0]))
    assert y.data.tolist() == [1, 2]
    y = DenseVector([0.0, 0.0, 0.0])
    la.axpy(y, 2.0, DenseVector([1.0, 2.0, 3.0]))
    assert y.data.tolist() == [2, 4, 6]


def test_length_and_precision_mismatch():
    with pytest.raises(ValueError):
        la.axpy(DenseVector([1.0, 2.0]), 1.0, DenseVector([1.0]))
    with pytest.raises(PrecisionMismatch):
        la.axpy(DenseVector([1.0]), 1.0, DenseVector([1.0], "single"))
    with pytest.raises(ValueError):
        la.dot(DenseVector([1.0, 2.0]), DenseVector([1.0]))


def test_scaled_sum_examples():
    a, b, r = DenseVector([1.0, 1.0]), DenseVector([2.0, 2.0]), DenseVector([0.0, 0.0])
    la.scaled_sum(r, a, b, 2.0, 3.0)
    assert r.data.tolist() == [8, 8]
    la.scaled_sum(r, a, b, 1.0, 0.0)
    assert np.array_equal(r.data, a.data)


@given(seeds, sizes, st.floats(-4, 4), st.floats(-4, 4))
def test_scaled_sum_equals_axpy_composition(seed, n, alpha, beta):
    rng = np.random.default_rng(seed)
    a, b = vec(rng, n), vec(rng, n)
    r = DenseVector.zeros_like(a)
    la.scaled_sum(r, a, b, alpha, beta, BackendTag.GENERIC)
    c = la.elementwise("scale", a, alpha=alpha)
    bb = la.elementwise("scale", b, alpha=beta)
    la.axpy(c, 1.0, bb)
    assert np.array_equal(r.data, c.data)


def test_elementwise_examples():
    p = la.elementwise("product", DenseVector([1.0, 2, 3]), DenseVector([4.0, 5, 6]))
    assert p.data.tolist() == [4, 10, 18]
    x = DenseVector(np.random.default_rng(1).standard_normal(50))
    assert not la.elementwise("difference", x, x).data.any()
    assert np.array_equal(la.elementwise("scale", x, alpha=1.0).data, x.data)
    assert la.elementwise("sum", DenseVector([1.0]), DenseVector([2.0])).data[0] == 3.0
    with pytest.raises(ValueError):
        la.elementwise("power", x, x)
    with pytest.raises(ValueError):
        la.elementwise("sum", x)


def test_dot_and_norm_examples():
    e1 = DenseVector([1.0, 0, 0, 0])
    assert la.dot(e1, e1) == 1.0
    assert la.dot(DenseVector([1.0, 2, 3]), DenseVector([1.0, 1, 1])) == 6.0
    assert la.norm_l2(DenseVector(np.zeros(5))) == 0.0
    assert la.norm_l2(DenseVector([3.0, 4.0])) == 5.0
    x = DenseVector(np.random.default_rng(2).standard_normal(300))
    for tag in TAGS:
        assert la.norm_l2(x, squared=True, backend=tag) == la.dot(x, x, tag)


@pytest.mark.parametrize("tag", TAGS)
def test_dot_against_compensated_oracle(rng, tag):
    x, y = vec(rng, 10_000, positive=True), vec(rng, 10_000, positive=True)
    exact = kahan_sum(x.data * y.data)
    assert rel(float(la.dot(x, y, tag)), exact) <= 1e-13


@pytest.mark.parametrize("tag", TAGS)
def test_dot_single_precision(rng, tag):
    x = vec(rng, 100_000, "single", positive=True)
    y = vec(rng, 100_000, "single", positive=True)
    exact = kahan_sum(x.data.astype(np.float64) * y.data.astype(np.float64))
    assert rel(float(la.dot(x, y, tag)), exact) <= 1e-5


def test_blocked_dot_close_to_generic_large(rng):
    x, y = vec(rng, 10**5, positive=True), vec(rng, 10**5, positive=True)
    g = la.dot(x, y, "generic")
    b = la.dot(x, y, "blocked")
    assert rel(float(b), float(g)) <= 1e-12


@pytest.mark.parametrize("tag", TAGS)
def test_reductions_are_deterministic(rng, tag):
    x, y = vec(rng, 5000), vec(rng, 5000)
    runs = {la.dot(x, y, tag).tobytes() for _ in range(5)}
    assert len(runs) == 1


# -- backend equivalence ----------------------------------------------------------

@given(seeds, sizes, st.sampled_from(["single", "double"]), st.floats(-3, 3))
def test_elementwise_family_bitwise_across_backends(seed, n, prec, alpha):
    rng = np.random.default_rng(seed)
    a, b = vec(rng, n, prec), vec(rng, n, prec)
    results = []
    for tag in TAGS:
        y = a.copy()
        la.axpy(y, alpha, b, tag)
        r = DenseVector.zeros_like(a)
        la.scaled_sum(r, a, b, alpha, 0.5, tag)
        ew = [la.elementwise(op, a, b, alpha=alpha, backend=tag).data
              for op in ("sum", "difference", "product", "scale")]
        results.append([y.data, r.data, *ew])
    for other in results[1:]:
        for u, v in zip(results[0], other):
            assert u.tobytes() == v.tobytes()


@given(seeds, st.integers(2, 30), st.sampled_from(["single", "double"]))
def test_matvec_bitwise_across_backends(seed, m, prec):
    rng = np.random.default_rng(seed)
    n = m * m
    A = banded_from_bands(n, random_q1_bands(rng, m), prec, Layout.Q1_FIXED)
    x = vec(rng, n, prec)
    outs = [la.banded_matvec(A, x, backend=tag).data.tobytes() for tag in TAGS]
    assert outs[0] == outs[1] == outs[2]


@given(seeds, st.integers(2, 20))
def test_q1_path_equals_arbitrary_path(seed, m):
    rng = np.random.default_rng(seed)
    n = m * m
    Aq = banded_from_bands(n, random_q1_bands(rng, m), layout=Layout.Q1_FIXED)
    Aa = Aq.with_layout(Layout.ARBITRARY)
    x = vec(rng, n)
    for tag in TAGS:
        # value equality: the padded fast path can produce -0.0 where the
        # clipped path leaves +0.0, nothing else may differ
        assert np.array_equal(la.banded_matvec(Aq, x, backend=tag).data,
                              la.banded_matvec(Aa, x, backend=tag).data)


# -- banded matvec ------------------------------------------------------------------

def test_matvec_examples():
    I = banded_from_bands(4, {0: np.ones(4)})
    x = DenseVector([1.0, 2, 3, 4])
    assert np.array_equal(la.banded_matvec(I, x).data, x.data)
    S = banded_from_bands(4, {1: [1, 1, 1, 99]})
    assert la.banded_matvec(S, x).data.tolist() == [2, 3, 4, 0]


def test_matvec_vs_dense_oracle(rng):
    bands = random_q1_bands(rng, 9)
    A = banded_from_bands(81, bands, layout=Layout.Q1_FIXED)
    x = vec(rng, 81)
    D = dense_from_bands(81, bands)
    for tag in TAGS:
        y = la.banded_matvec(A, x, backend=tag).data
        assert np.max(np.abs(y - D @ x.data)) <= 1e-13
        assert np.max(np.abs(y - loop_matvec(bands, x.data))) <= 1e-13


@given(seeds, st.integers(1, 40), st.data())
def test_arbitrary_matvec_vs_loop_oracle(seed, n, data):
    rng = np.random.default_rng(seed)
    offs = data.draw(st.sets(st.integers(-(n - 1), n - 1), max_size=6))
    bands = {k: rng.standard_normal(n) for k in offs}
    A = banded_from_bands(n, bands)
    x = vec(rng, n)
    y = la.banded_matvec(A, x, backend=data.draw(st.sampled_from(TAGS))).data
    assert np.allclose(y, loop_matvec(A.bands, x.data), rtol=0, atol=1e-12)


def test_matvec_errors():
    A = BandedMatrix(4)
    with pytest.raises(ValueError):
        la.banded_matvec(A, DenseVector(np.ones(5)))
    with pytest.raises(PrecisionMismatch):
        la.banded_matvec(A, DenseVector(np.ones(4), "single"))
    x = DenseVector(np.ones(4))
    with pytest.raises(ValueError):
        la.banded_matvec(A, x, out=x.view())


# -- residual norm ------------------------------------------------------------------

def test_residual_norm_examples(rng):
    y = vec(rng, 49)
    A = banded_from_bands(49, {0: np.ones(49)}, layout=Layout.Q1_FIXED)
    assert la.residual_norm(1.0, y, 0.0, A, y) == pytest.approx(float(la.norm_l2(y)), rel=1e-15)
    assert la.residual_norm(1.0, y, -1.0, A, y) == 0.0


@given(seeds, st.integers(2, 25), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(TAGS))
def test_residual_norm_vs_atomic_composition(seed, m, alpha, beta, tag):
    rng = np.random.default_rng(seed)
    n = m * m
    A = banded_from_bands(n, random_q1_bands(rng, m), layout=Layout.Q1_FIXED)
    x, y = vec(rng, n), vec(rng, n)
    r = DenseVector.zeros_like(y)
    la.scaled_sum(r, y, la.banded_matvec(A, x, backend=tag), alpha, beta, tag)
    composed = float(la.norm_l2(r, backend=tag))
    fused = float(la.residual_norm(alpha, y, beta, A, x, tag))
    assert abs(fused - composed) <= 1e-13 * max(composed, 1e-300) or composed == fused


# -- precision conversion -------------------------------------------------------------

def test_convert_examples():
    x = DenseVector([1.0, 2.0])
    s = la.convert_precision(x, "single")
    assert s.dtype == np.float32 and s.data.tolist() == [1.0, 2.0]
    assert la.convert_precision(DenseVector([1 + 2.0**-30]), "single").data[0] == 1.0
    assert s.block_id != x.block_id


@given(seeds, st.integers(1, 500))
def test_convert_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    x = DenseVector(rng.standard_normal(n) * 10.0 ** rng.integers(-5, 5, n))
    back = la.convert_precision(la.convert_precision(x, "single"), "double")
    assert np.array_equal(back.data, x.data.astype(np.float32).astype(np.float64))
    assert np.all(np.abs(back.data - x.data) <= 2.0**-24 * np.abs(x.data))


def test_defect_and_copy_into(rng):
    A = banded_from_bands(16, random_q1_bands(rng, 4), layout=Layout.Q1_FIXED)
    x, b = vec(rng, 16), vec(rng, 16)
    d = la.defect(b, A, x)
    assert np.allclose(d.data, b.data - A.to_dense() @ x.data, atol=1e-14)
    dst = DenseVector.zeros_like(x)
    la.copy_into(dst, x)
    assert np.array_equal(dst.data, x.data)
