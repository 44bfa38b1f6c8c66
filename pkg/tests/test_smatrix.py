import numpy as np
import pytest

from paqft.algebra import OverlappingSupports, ProductContext
from paqft.functional import FormalSeries, PolyFunctional
from paqft.graphs import graph_expansion
from paqft.model import ModelSpec, build_model, cauchy_solution
from paqft.smatrix import (InteractionSpec, NonlocalCorrection, Perturbation, causal_factorization_residual,
                           corrected_timeordered, extract_z2, field_equation_residual, interacting_field,
                           main_theorem_defect, mass_perturbation_defect, mass_perturbation_green_defect,
                           past_conjugation_defect, retarded_dependence_defect, source_series_reference,
                           translate, translation_defect, weyl_source_defect, weyl_taylor_defect,
                           z_axiom_residuals)

from conftest import bump

SPEC = ModelSpec("qm", 1.0, 3.0, 24)
PROPS = build_model(SPEC)
T = SPEC.point_times


def local(**densities):
    return PolyFunctional.local(SPEC, {int(k[1:]): v for k, v in densities.items()})


V = local(p2=0.5 * bump(T, 0.0, 1.5), p4=0.1 * bump(T, 0.0, 1.5))


@pytest.mark.parametrize("picture", ["hadamard", "dirac"])
def test_inverse_and_unitarity(picture):
    pert = Perturbation(PROPS, picture, (2, 2))
    S = pert.smatrix(V)
    assert (pert.star(pert.smatrix_inverse(V), S) - pert.unit()).max_abs() < 1e-10
    assert pert.unitarity_defect(V) < 1e-9


def test_first_orders_of_smatrix():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    S = pert.smatrix(V)
    assert S[(0, 0)].distance(PolyFunctional.constant(SPEC, 1.0)) == 0
    assert S[(-1, 1)].distance(V * 1j) < 1e-15


def test_second_order_against_graph_sum():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    quad = local(p2=bump(T, 0.0, 1.5))
    S = pert.smatrix(quad)
    gx = graph_expansion([quad, quad], pert.tprod.kernel, (2, 0))
    # (i/hbar)^2 / 2 times the n-line graph at hbar^n
    for (n, _), term in gx.coeffs.items():
        assert S[(n - 2, 2)].distance(term * -0.5) < 1e-10


def test_linear_source_against_weyl():
    pert = Perturbation(PROPS, "dirac", (2, 4))
    f = bump(T, 0.2, 1.0)
    phi = np.random.default_rng(0).normal(size=SPEC.size) * 0.3
    assert weyl_taylor_defect(pert, f, phi) < 1e-8
    # truncation error scales like the next power of the coupling
    assert weyl_source_defect(pert, f, 1.0, [0.05, 0.1, 0.2], phi) < 10.0
    with pytest.raises(ValueError):
        weyl_taylor_defect(Perturbation(PROPS, "hadamard", (2, 4)), f, phi)


def test_linear_source_reference_series():
    pert = Perturbation(PROPS, "hadamard", (2, 3))
    f = bump(T, -0.3, 1.2)
    got = pert.smatrix(PolyFunctional.linear(SPEC, f))
    assert got.distance(source_series_reference(pert, f)) < 1e-12


def test_interacting_field_equation():
    spec = ModelSpec("qm", 1.0, 3.0, 48)
    props = build_model(spec)
    t = spec.point_times
    pert = Perturbation(props, "hadamard", (2, 1))
    quartic = PolyFunctional.local(spec, {4: bump(t, 0.0, 2.0) / 24})
    phi = cauchy_solution(spec, [0.7], [0.3])
    R = interacting_field(pert, quartic, spec.n_t // 2)
    assert R[(0, 0)].distance(PolyFunctional.evaluation(spec, spec.n_t // 2)) == 0
    assert field_equation_residual(pert, quartic, phi) < 1e-6


def test_mass_perturbation():
    spec = ModelSpec("qm", 1.0, 3.0, 48)
    props = build_model(spec)
    g = bump(spec.point_times, 0.0, 2.0)
    phi = cauchy_solution(spec, [0.7], [0.3])
    pert = Perturbation(props, "hadamard", (2, 1))
    assert mass_perturbation_defect(pert, g, phi) < 1e-6
    assert mass_perturbation_green_defect(pert, g, phi) < 1e-10


LATE = bump(T, 1.8, 0.6)
MID = bump(T, 0.0, 0.8)
EARLY = bump(T, -1.8, 0.6)
F_LATE = local(p2=LATE, p1=0.5 * LATE)
G_MID = local(p2=0.3 * MID, p3=0.2 * MID)
H_EARLY = local(p2=EARLY, p4=0.1 * EARLY)


@pytest.mark.parametrize("picture", ["hadamard", "dirac"])
def test_causal_factorization(picture):
    pert = Perturbation(PROPS, picture, (2, 2))
    assert causal_factorization_residual(pert, F_LATE, G_MID, H_EARLY) < 1e-8


def test_factorization_fails_for_reversed_order():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    with pytest.raises(OverlappingSupports):
        causal_factorization_residual(pert, H_EARLY, G_MID, F_LATE)
    lhs = pert.smatrix(H_EARLY + G_MID + F_LATE)
    rhs = pert.star.multi(pert.smatrix(H_EARLY + G_MID), pert.smatrix_inverse(G_MID),
                          pert.smatrix(G_MID + F_LATE))
    assert (lhs - rhs).max_abs() > 1e-3


def test_retarded_dependence_and_past_conjugation():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    assert retarded_dependence_defect(pert, G_MID, H_EARLY, F_LATE) < 1e-10
    assert past_conjugation_defect(pert, G_MID, F_LATE, H_EARLY) < 1e-10
    with pytest.raises(OverlappingSupports):
        retarded_dependence_defect(pert, G_MID, F_LATE, H_EARLY)


def test_time_translation_covariance():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    small = local(p2=bump(T, 0.0, 0.8), p3=0.2 * bump(T, 0.0, 0.8))
    assert translation_defect(pert, small, 3) < 1e-12
    assert translation_defect(pert, small, -2) < 1e-12
    with pytest.raises(ValueError):
        translate(local(p2=LATE), 10)


def test_interacting_product():
    spec = ModelSpec("qm", 1.0, 2.0, 12)
    props = build_model(spec)
    t = spec.point_times
    pert = Perturbation(props, "hadamard", (1, 1))
    W = PolyFunctional.local(spec, {3: 0.2 * bump(t, 0.0, 1.0)})
    A, B, C = (PolyFunctional.linear(spec, bump(t, c, 0.8)) for c in (-0.9, 0.1, 0.9))
    # R_V^{-1} inverts R_V
    X = pert.bogoliubov(W, A)
    assert (pert.bogoliubov(W, pert.bogoliubov_inverse(W, X)) - X).max_abs() < 1e-12
    lhs = pert.interacting_product(W, pert.interacting_product(W, A, B), C)
    rhs = pert.interacting_product(W, A, pert.interacting_product(W, B, C))
    assert (lhs - rhs).max_abs() < 1e-10


def test_interaction_spec():
    f = bump(T, 0.0, 1.0)
    built = InteractionSpec(((2, f), (4, 0.1 * f))).functional(SPEC)
    assert built.distance(local(p2=f, p4=0.1 * f)) == 0
    with pytest.raises(ValueError):
        InteractionSpec(((0, f),)).functional(SPEC)


def test_exponent_validation():
    pert = Perturbation(PROPS, "hadamard", (2, 2))
    with pytest.raises(ValueError):
        pert.exponent(FormalSeries({(0, 0): V}, (2, 2)))
    with pytest.raises(ValueError):
        Perturbation(PROPS, "schroedinger")


# ----------------------------------------------------------- renormalization maps

Z_F = local(p2=bump(T, 1.5, 0.6), p4=0.2 * bump(T, 1.5, 0.6))
Z_G = local(p2=0.5 * bump(T, 0.0, 0.6))
Z_H = local(p2=bump(T, -1.5, 0.6), p3=0.3 * bump(T, -1.5, 0.6))


@pytest.fixture(scope="module")
def zmap():
    return extract_z2(ProductContext(PROPS, "timeordered_f"), corrected_timeordered(PROPS, 0.1))


def test_main_theorem_second_order(zmap):
    assert main_theorem_defect(PROPS, zmap, Z_F + Z_G + Z_H) < 1e-10


def test_z_axioms(zmap):
    res = z_axiom_residuals(zmap, Z_F, Z_G, Z_H, np.sin(T))
    assert set(res) == {"zero", "identity", "hbar", "locality", "shift"}
    assert max(res.values()) < 1e-10


def test_z_correction_is_nontrivial_and_local(zmap):
    z2 = zmap.second_order(Z_F, Z_F)
    assert z2.max_abs() > 1e-3
    # supported where F is
    for v in z2.coeffs.values():
        sup = v.support(1e-14)
        assert sup is None or sup.t_min >= 1.5 - 0.6 - 1e-9


def test_same_products_give_identity_map():
    base = ProductContext(PROPS, "timeordered_f")
    assert extract_z2(base, base).second_order(Z_F, Z_F).max_abs() == 0


def test_nonlocal_modification_rejected():
    base = ProductContext(PROPS, "timeordered_f")
    bad = corrected_timeordered(PROPS, 0.1, correction=np.ones((SPEC.size, SPEC.size)))
    with pytest.raises(NonlocalCorrection):
        extract_z2(base, bad)
