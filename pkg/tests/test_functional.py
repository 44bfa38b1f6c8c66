import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paqft.functional import MAX_DEGREE, FormalSeries, PolyFunctional
from paqft.model import ModelSpec

SPEC = ModelSpec("qm", 1.0, 2.0, 9)


def random_functional(rng, spec=SPEC):
    a = rng.normal(size=(spec.size, spec.size))
    return (PolyFunctional.local(spec, {1: rng.normal(size=spec.size), 3: rng.normal(size=spec.size)})
            + PolyFunctional.bilocal(spec, a + a.T)
            + PolyFunctional.constant(spec, rng.normal()))


def test_integral_of_field_squared():
    spec = ModelSpec("qm", 1.0, 2.0, 41)
    t = spec.times
    # trapezoid-consistent indicator of [0, 1]: half weight at the jumps
    f = np.where((t > 0) & (t < 1), 1.0, 0.0) + 0.5 * (np.isclose(t, 0) | np.isclose(t, 1))
    F = PolyFunctional.local(spec, {2: f})
    assert abs(F(np.full(spec.size, np.sqrt(2.0))) - 2.0) < 1e-12


def test_second_derivative_is_grid_delta():
    f = np.linspace(0.5, 1.5, SPEC.size)
    F = PolyFunctional.local(SPEC, {2: f})
    k = F.derivative_kernel(np.zeros(SPEC.size), 2)
    assert np.allclose(k, np.diag(2 * f / SPEC.weights))


def test_evaluation_functional():
    phi = np.arange(SPEC.size, dtype=float)
    assert PolyFunctional.evaluation(SPEC, 4)(phi) == pytest.approx(4.0)


def test_degree_cap():
    with pytest.raises(ValueError):
        PolyFunctional.local(SPEC, {MAX_DEGREE + 1: np.ones(SPEC.size)})


def test_grid_mismatch():
    with pytest.raises(ValueError):
        PolyFunctional.linear(SPEC, np.ones(SPEC.size + 1))


def test_support_and_ordering():
    t = SPEC.times
    early = PolyFunctional.local(SPEC, {2: (t < -1).astype(float)})
    late = PolyFunctional.local(SPEC, {2: (t > 1).astype(float)})
    assert early.support().precedes(late.support())
    assert not late.support().precedes(early.support())
    assert PolyFunctional.zero(SPEC).support() is None


def test_canonical_form_merges_coincident_vertices():
    f = np.linspace(-1, 1, SPEC.size)
    local = PolyFunctional.local(SPEC, {2: f})
    diag = PolyFunctional.bilocal(SPEC, np.diag(f / SPEC.weights))
    assert local.distance(diag) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_derivative_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    F = random_functional(rng)
    phi, h = rng.normal(size=(2, SPEC.size))
    eps = 1e-5
    fd = (F(phi + eps * h) - F(phi - eps * h)) / (2 * eps)
    assert abs(F.directional_derivative(phi, h) - fd) < 1e-6 * max(1.0, abs(fd))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shift_is_translation_of_argument(seed):
    rng = np.random.default_rng(seed)
    F = random_functional(rng)
    phi, psi = rng.normal(size=(2, SPEC.size))
    assert abs(F.shift(psi)(phi) - F(phi + psi)) < 1e-10 * max(1.0, abs(F(phi + psi)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pointwise_product_evaluates_to_product(seed):
    rng = np.random.default_rng(seed)
    F = PolyFunctional.local(SPEC, {2: rng.normal(size=SPEC.size)})
    G = PolyFunctional.linear(SPEC, rng.normal(size=SPEC.size))
    phi = rng.normal(size=SPEC.size)
    assert abs(F.pointwise(G)(phi) - F(phi) * G(phi)) < 1e-10


# ---------------------------------------------------------------- series

series_coeffs = st.dictionaries(st.tuples(st.integers(0, 3), st.integers(0, 3)),
                                st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                                max_size=6)


@settings(max_examples=50, deadline=None)
@given(series_coeffs, series_coeffs, series_coeffs)
def test_series_product_associative(a, b, c):
    A, B, C = (FormalSeries(x, (3, 3)) for x in (a, b, c))
    assert ((A * B) * C).distance(A * (B * C)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(series_coeffs, st.complex_numbers(min_magnitude=0.5, max_magnitude=5, allow_nan=False,
                                         allow_infinity=False))
def test_series_inverse(a, c0):
    a = dict(a)
    a[(0, 0)] = c0
    A = FormalSeries(a, (3, 3))
    one = FormalSeries.scalar(1.0, (3, 3))
    assert (A * A.inverse()).distance(one) < 1e-8


def test_series_exp_of_sum():
    X = FormalSeries({(1, 0): 0.3, (0, 1): -0.7}, (4, 4))
    Y = FormalSeries({(1, 1): 1.1, (2, 0): 0.2}, (4, 4))
    assert (X + Y).exp().distance(X.exp() * Y.exp()) < 1e-12


def test_lambda_weight_grading():
    S = FormalSeries({(-1, 1): 1.0}, (2, 2), lambda_weight=1)
    assert S.grade((-1, 1)) == 0
    sq = S * S
    assert sq[(-2, 2)] == 1.0
    with pytest.raises(ValueError):
        FormalSeries({(-2, 1): 1.0}, (2, 2), lambda_weight=1)


def test_truncation_drops_high_orders():
    A = FormalSeries({(1, 0): 1.0}, (2, 2))
    assert (A * A * A).coeffs == {}


def test_distance_across_caps():
    A = FormalSeries({(0, 0): 1.0, (1, 0): 2.0}, (1, 0))
    B = FormalSeries({(0, 0): 1.0, (1, 0): 2.0, (2, 0): 0.5}, (2, 0))
    assert A.distance(B) == 0.5


def test_at_hbar_sums_columns():
    S = FormalSeries({(0, 1): 1.0, (1, 1): 2.0, (0, 2): 3.0}, (2, 2))
    assert S.at_hbar(0.5) == {1: 2.0, 2: 3.0}
