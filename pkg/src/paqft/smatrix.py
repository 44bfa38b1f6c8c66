"""Formal S-matrices, Bogoliubov maps and renormalization maps.

All series here carry one inverse power of hbar per power of the coupling,
so they are built with ``lambda_weight=1``: the key ``(j, k)`` stands for
``hbar**j * lambda**k`` and the truncation grade is ``j + k``.  Interactions
are supplied either as a polynomial functional ``V`` (meaning ``lambda V``)
or as a plain series in ``(hbar, lambda)`` with ``lambda_weight=0``.

A picture fixes the pair of products: ``hadamard`` uses the Wightman star
product with the Feynman time-ordered product, ``dirac`` uses the plain star
product with the Dirac time-ordered product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import OverlappingSupports, ProductContext
from .functional import FormalSeries, PolyFunctional
from .model import PropagatorSet, green_functions, linearize

PICTURES = {
    "hadamard": ("star_h", "timeordered_f"),
    "dirac": ("star", "timeordered_d"),
}


@dataclass(frozen=True)
class InteractionSpec:
    """``sum_j int f_j phi^(p_j)`` given as ``((p_j, f_j), ...)``."""

    terms: tuple

    def functional(self, spec) -> PolyFunctional:
        out = PolyFunctional.zero(spec)
        for p, f in self.terms:
            if p < 1:
                raise ValueError("interaction monomials need positive degree")
            out = out + PolyFunctional.local(spec, {p: f})
        return out


class Perturbation:
    """Star product, time-ordered product and truncation caps of one picture.

    ``timeordered`` overrides the time-ordered product, e.g. with a
    renormalized variant from :func:`corrected_timeordered`.
    """

    def __init__(self, props: PropagatorSet, picture: str = "hadamard", caps=(2, 2),
                 timeordered: ProductContext | None = None):
        if picture not in PICTURES:
            raise ValueError(f"unknown picture {picture!r}")
        if caps[0] < 0 or caps[1] < 0:
            raise ValueError("caps must be non-negative")
        self.props = props
        self.spec = props.spec
        self.picture = picture
        self.caps = (int(caps[0]), int(caps[1]))
        star_kind, t_kind = PICTURES[picture]
        self.star = ProductContext(props, star_kind)
        self.tprod = timeordered if timeordered is not None else ProductContext(props, t_kind)
        self._cache: dict[int, tuple] = {}

    def _pair(self, V):
        # keyed by identity; the interaction object is kept alive with its entry
        hit = self._cache.get(id(V))
        if hit is None or hit[0] is not V:
            S = self.tprod.exp(self.exponent(V))
            hit = (V, S, self.star.inverse(S))
            self._cache[id(V)] = hit
        return hit[1], hit[2]

    # series helpers -----------------------------------------------------
    def empty(self) -> FormalSeries:
        return FormalSeries(None, self.caps, 1)

    def lift(self, F) -> FormalSeries:
        """Coupling-independent observable as a series."""
        if isinstance(F, FormalSeries):
            if F.lambda_weight != 1 or F.caps != self.caps:
                raise ValueError("observable series must use this perturbation's caps")
            return F
        if not isinstance(F, PolyFunctional):
            F = PolyFunctional.constant(self.spec, F)
        return FormalSeries({(0, 0): F}, self.caps, 1)

    def exponent(self, V) -> FormalSeries:
        """``(i/hbar) V`` with ``V`` either a functional (times lambda) or a plain series."""
        out = self.empty()
        if isinstance(V, PolyFunctional):
            out._put((-1, 1), 1j * V)
            return out
        if V.lambda_weight != 0:
            raise ValueError("interaction series must use plain grading")
        for (j, k), v in V.coeffs.items():
            if k < 1:
                raise ValueError("interaction series must vanish at zero coupling")
            out._put((j - 1, k), 1j * v)
        return out

    def unit(self) -> FormalSeries:
        return self.lift(1.0)

    # S-matrices -----------------------------------------------------------
    def smatrix(self, V) -> FormalSeries:
        """``sum_n (i/hbar)^n lambda^n / n! T_n(V, ..., V)``."""
        return self._pair(V)[0]

    def smatrix_inverse(self, V) -> FormalSeries:
        return self._pair(V)[1]

    def relative_smatrix(self, g, f) -> FormalSeries:
        """``S(g)^{-1} * S(g + f)``."""
        return self.star(self.smatrix_inverse(g), self.smatrix(g + f))

    def unitarity_defect(self, V) -> float:
        S = self.smatrix(V)
        return float((self.star(S.conj(), S) - self.unit()).max_abs())

    # Bogoliubov map -------------------------------------------------------
    def bogoliubov(self, V, F) -> FormalSeries:
        """``R_V(F) = S(V)^{-1} * T(S(V), F)``, linear in ``F``."""
        S, S_inv = self._pair(V)
        return self.star(S_inv, self.tprod(S, self.lift(F)))

    def bogoliubov_inverse(self, V, X) -> FormalSeries:
        """Solve ``R_V(Y) = X`` order by order in the coupling."""
        X = self.lift(X)
        Y = X
        for _ in range(self.caps[1] + 1):
            Y = X - (self.bogoliubov(V, Y) - Y)
        return Y

    def interacting_product(self, V, F, G) -> FormalSeries:
        """``R_V^{-1}(R_V(F) * R_V(G))``."""
        prod = self.star(self.bogoliubov(V, F), self.bogoliubov(V, G))
        return self.bogoliubov_inverse(V, prod)


def interacting_field(pert: Perturbation, V, index: int) -> FormalSeries:
    return pert.bogoliubov(V, PolyFunctional.evaluation(pert.spec, index))


def evaluate_series(series: FormalSeries, phi, hbar: float = 1.0) -> dict:
    """Coefficients of each coupling power at numeric ``hbar``, evaluated at ``phi``."""
    out = {}
    for k, v in series.at_hbar(hbar).items():
        out[k] = v(phi) if isinstance(v, PolyFunctional) else complex(v)
    return out


# ---------------------------------------------------------------------------
# consistency checks


def _interior_rows(spec) -> np.ndarray:
    rows = np.arange(spec.size)
    t = rows % spec.n_t
    return rows[(t > 0) & (t < spec.n_t - 1)]


def field_equation_residual(pert: Perturbation, V: PolyFunctional, phi, hbar: float = 1.0) -> float:
    """First-order residual of ``E'(R_V(phi)) = E'(phi) + R_V(V^(1))`` at ``phi``.

    ``E'`` is minus the free field operator.  The zeroth-order part of both
    sides cancels identically; at first order only ``V^(1)`` itself survives
    on the right.  Rows at the grid ends are excluded because the stencil
    needs both neighbours.
    """
    spec = pert.spec
    if pert.caps[1] < 1:
        raise ValueError("need at least first order in the coupling")
    phi = np.asarray(phi, dtype=float)
    first = np.array([evaluate_series(interacting_field(pert, V, i), phi, hbar).get(1, 0.0)
                      for i in range(spec.size)])
    op = linearize(spec, None).matrix
    source = V.derivative_kernel(phi, 1)
    rows = _interior_rows(spec)
    return float(np.abs((-(op @ first) - source)[rows]).max())


def march(op, start) -> np.ndarray:
    """Solve ``op u = 0`` forward in each block from the first two samples of ``start``."""
    spec = op.spec
    n = spec.n_t
    start = np.asarray(start, dtype=float)
    out = np.empty(spec.size)
    for b in range(spec.n_blocks):
        o = b * n
        u = out[o:o + n]
        u[0], u[1] = start[o], start[o + 1]
        for i in range(1, n - 1):
            u[i + 1] = 2 * op.cosines[o + i] * u[i] - u[i - 1]
    return out


def mass_perturbation_defect(pert: Perturbation, g, phi, hbar: float = 1.0, step: float = 1e-4) -> float:
    """First-order interacting field for ``V = 1/2 int g phi^2`` against a marched mass shift.

    The reference is the derivative in the coupling, by central differences,
    of the solution of the shifted stencil that starts like ``phi``.
    """
    spec = pert.spec
    g = np.asarray(g, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ends = np.concatenate([np.arange(spec.n_blocks) * spec.n_t + o for o in (0, 1)])
    if np.any(g[ends] != 0) or np.any(g[np.arange(spec.n_blocks) * spec.n_t + spec.n_t - 1] != 0):
        raise ValueError("the mass perturbation must vanish at the grid ends")
    V = PolyFunctional.local(spec, {2: 0.5 * g})
    first = np.array([evaluate_series(interacting_field(pert, V, i), phi, hbar).get(1, 0.0)
                      for i in range(spec.size)])
    base = np.repeat(spec.frequencies**2, spec.n_t)
    from .model import LinearizedOperator

    up = march(LinearizedOperator.from_potential(spec, base + step * g), phi)
    down = march(LinearizedOperator.from_potential(spec, base - step * g), phi)
    reference = (up - down) / (2 * step)
    return float(np.abs(first - reference).max())


def mass_perturbation_green_defect(pert: Perturbation, g, phi) -> float:
    """Same comparison against ``-h G_ret (g phi)`` with the marched Green function."""
    spec = pert.spec
    g = np.asarray(g, dtype=float)
    phi = np.asarray(phi, dtype=float)
    V = PolyFunctional.local(spec, {2: 0.5 * g})
    first = np.array([evaluate_series(interacting_field(pert, V, i), phi).get(1, 0.0)
                      for i in range(spec.size)])
    gr, _ = green_functions(linearize(spec, None))
    reference = -gr @ (spec.weights * g * phi)
    return float(np.abs(first - reference).max())


def source_series_reference(pert: Perturbation, f) -> FormalSeries:
    """Closed-form expansion of ``S(lambda F_f)`` for a linear source.

    ``exp(i lambda F_f / hbar - lambda^2 / (2 hbar) <f, K f>)`` with the
    time-ordering kernel ``K``, expanded with the pointwise product.
    """
    spec = pert.spec
    f = np.asarray(f, dtype=float)
    K = pert.tprod.kernel
    quad = complex(spec.pair(f, K, f))
    X = pert.empty()
    X._put((-1, 1), 1j * PolyFunctional.linear(spec, f))
    X._put((-1, 2), PolyFunctional.constant(spec, -0.5 * quad))
    return X.exp(lambda a, b: a.pointwise(b) if isinstance(a, PolyFunctional) and isinstance(b, PolyFunctional)
                 else a * b, unit=PolyFunctional.constant(spec, 1.0))


def weyl_source_defect(pert: Perturbation, f, hbar: float, couplings, phi) -> float:
    """Truncated formal S-matrix of a linear source against the Weyl closed form.

    The exact value at coupling ``lam`` is ``exp(i lam F_f(phi) / hbar)`` times
    the phase of the Weyl element ``S(lam f)`` (Dirac picture).  Returns the
    largest difference divided by ``lam**(N+1)``, which stays bounded when the
    truncation is correct through order ``N``.
    """
    from .weyl import source_smatrix

    if pert.picture != "dirac":
        raise ValueError("the Weyl closed form uses the Dirac picture")
    spec = pert.spec
    f = np.asarray(f, dtype=float)
    phi = np.asarray(phi, dtype=float)
    coeffs = evaluate_series(pert.smatrix(PolyFunctional.linear(spec, f)), phi, hbar)
    order = pert.caps[1]
    worst = 0.0
    for lam in couplings:
        w = source_smatrix(pert.props, lam * f, hbar)
        g, phase = w.monomial()
        exact = phase * np.exp(1j * spec.pair(g, np.eye(spec.size) / spec.weights, phi))
        approx = sum(c * lam**k for k, c in coeffs.items())
        worst = max(worst, abs(exact - approx) / abs(lam) ** (order + 1))
    return float(worst)


def causal_factorization_residual(pert: Perturbation, f, g, h) -> float:
    """``S(f+g+h) - S(f+g) * S(g)^{-1} * S(g+h)``; ``f`` must lie strictly after ``h``."""
    sf, sh = f.support(), h.support()
    if sf is not None and sh is not None and not sh.precedes(sf):
        raise OverlappingSupports("the first interaction reaches the past of the last")
    lhs = pert.smatrix(f + g + h)
    rhs = pert.star.multi(pert.smatrix(f + g), pert.smatrix_inverse(g), pert.smatrix(g + h))
    return float((lhs - rhs).max_abs())


def translate(F: PolyFunctional, steps: int) -> PolyFunctional:
    """Shift every kernel by ``steps`` time samples; refuses to push support off the grid."""
    spec = F.spec
    out = PolyFunctional(spec)
    for mult, c in F.terms.items():
        if not mult:
            out._accumulate(mult, c)
            continue
        shape = (spec.n_blocks, spec.n_t) * len(mult)
        a = c.reshape(shape)
        for axis in range(1, 2 * len(mult), 2):
            lost = np.take(a, range(spec.n_t - steps, spec.n_t) if steps > 0 else range(0, -steps), axis=axis)
            if np.any(lost != 0):
                raise ValueError("translation moves support off the grid")
            a = np.roll(a, steps, axis=axis)
        out._accumulate(mult, a.reshape(c.shape))
    return out


def translation_defect(pert: Perturbation, V: PolyFunctional, steps: int) -> float:
    moved = pert.smatrix(translate(V, steps))
    expected = pert.smatrix(V).map(lambda v: translate(v, steps) if isinstance(v, PolyFunctional) else v)
    return float((moved - expected).max_abs())


# ---------------------------------------------------------------------------
# renormalization maps


class NonlocalCorrection(ValueError):
    """Two time-ordered products differ by a term that is not supported on the diagonal."""


def corrected_timeordered(props: PropagatorSet, strength: float, picture: str = "hadamard",
                          correction=None) -> ProductContext:
    """Time-ordered product whose two-line contraction gains ``strength * delta``.

    ``correction`` replaces the delta kernel, which allows building
    non-local modifications for negative tests.
    """
    spec = props.spec
    kind = PICTURES[picture][1]
    base = ProductContext(props, kind)
    extra = np.diag(1.0 / spec.weights) if correction is None else np.asarray(correction)
    return ProductContext(props, kind, powers={2: base.kernel**2 + strength * extra})


def _power(ctx: ProductContext, k: int) -> np.ndarray:
    if ctx.powers and k in ctx.powers:
        return np.asarray(ctx.powers[k])
    return ctx.kernel**k


class RenormalizationMap:
    """Second-order map ``Z(V) = V + 1/2 z(V, V)`` with ``z = (i/hbar)(T' - T)``."""

    def __init__(self, base: ProductContext, modified: ProductContext, caps=(2, 2)):
        self.base = base
        self.modified = modified
        self.spec = base.spec
        self.caps = caps

    def second_order(self, F: PolyFunctional, G: PolyFunctional) -> FormalSeries:
        """``z(F, G)`` as a plain series in hbar."""
        cap = self.caps[0] + 1
        diff = self.modified(F, G, (cap, 0)) - self.base(F, G, (cap, 0))
        out = FormalSeries(None, (self.caps[0], 0), 0)
        for (j, _), v in diff.coeffs.items():
            if j < 1:
                if not (isinstance(v, PolyFunctional) and v.is_zero(1e-14)):
                    raise ValueError("products differ at order hbar^0")
                continue
            out._put((j - 1, 0), 1j * v)
        return out

    def __call__(self, V: PolyFunctional) -> FormalSeries:
        """``Z(lambda V)`` truncated at second order in the coupling."""
        out = FormalSeries(None, (self.caps[0] + 2, self.caps[1]), 0)
        out._put((0, 1), V)
        for (j, _), v in self.second_order(V, V).coeffs.items():
            out._put((j, 2), 0.5 * v)
        return out


def extract_z2(base: ProductContext, modified: ProductContext, caps=(2, 2), tol: float = 1e-12) -> RenormalizationMap:
    """Renormalization map relating two time-ordered products at second order.

    Both products must use the same one-line kernel, and every multi-line
    kernel may differ only on the diagonal.
    """
    if not np.allclose(base.kernel, modified.kernel, atol=tol, rtol=0):
        raise NonlocalCorrection("one-line kernels differ")
    keys = set(base.powers or {}) | set(modified.powers or {})
    for k in keys:
        diff = _power(modified, k) - _power(base, k)
        off = diff - np.diag(np.diag(diff))
        if np.abs(off).max() > tol * max(1.0, np.abs(diff).max()):
            raise NonlocalCorrection(f"{k}-line kernels differ off the diagonal")
    return RenormalizationMap(base, modified, caps)


def z_axiom_residuals(zmap: RenormalizationMap, F: PolyFunctional, G: PolyFunctional,
                      H: PolyFunctional, psi) -> dict:
    """Residuals of the renormalization-map conditions at second order.

    ``F`` and ``H`` must have disjoint supports.  Keys: ``zero`` (Z(0) = 0),
    ``identity`` (first-order part is the identity), ``hbar`` (corrections
    start at hbar^1), ``locality`` (additivity over disjoint supports) and
    ``shift`` (commutes with field shifts by ``psi``).
    """
    spec = zmap.spec
    zero = zmap(PolyFunctional.zero(spec)).max_abs()
    ZF = zmap(F)
    first = ZF.get((0, 1), PolyFunctional.zero(spec))
    identity = PolyFunctional.distance(first, F)
    classical = max((abs_max(v) for (j, k), v in ZF.coeffs.items() if k >= 2 and j == 0), default=0.0)
    lhs = zmap(F + G + H)
    rhs = zmap(F + G) - zmap(G) + zmap(G + H)
    locality = (lhs - rhs).max_abs()
    shifted = zmap(F).map(lambda v: v.shift(psi))
    direct = zmap(F.shift(psi))
    # the first-order parts agree trivially; compare the corrections
    shift = FormalSeries.distance(
        FormalSeries({k: v for k, v in shifted.coeffs.items() if k[1] >= 2}, shifted.caps, 0),
        FormalSeries({k: v for k, v in direct.coeffs.items() if k[1] >= 2}, direct.caps, 0),
    )
    return {"zero": float(zero), "identity": float(identity), "hbar": float(classical),
            "locality": float(locality), "shift": float(shift)}


def abs_max(v) -> float:
    return FormalSeries({(0, 0): v}, (0, 0)).max_abs()


def main_theorem_defect(props: PropagatorSet, zmap: RenormalizationMap, V: PolyFunctional,
                        picture: str = "hadamard") -> float:
    """``S'(V) - S(Z(V))`` through second order in the coupling."""
    caps = zmap.caps
    plain = Perturbation(props, picture, caps, zmap.base)
    renormalized = Perturbation(props, picture, caps, zmap.modified)
    return float((renormalized.smatrix(V) - plain.smatrix(zmap(V))).max_abs())


def _require_before(early: PolyFunctional, late: PolyFunctional, what: str):
    se, sl = early.support(), late.support()
    if se is not None and sl is not None and not se.precedes(sl):
        raise OverlappingSupports(what)


def retarded_dependence_defect(pert: Perturbation, g, f, k) -> float:
    """``S_{g+k}(f) - S_g(f)`` for a perturbation ``k`` strictly later than ``f``."""
    _require_before(f, k, "the perturbation must lie strictly after the observable")
    return float((pert.relative_smatrix(g + k, f) - pert.relative_smatrix(g, f)).max_abs())


def past_conjugation_defect(pert: Perturbation, g, f, k) -> float:
    """``S_{g+k}(f) - S_g(k)^{-1} * S_g(f) * S_g(k)`` for ``k`` strictly earlier than ``f``.

    The conjugating element does not depend on ``f``.
    """
    _require_before(k, f, "the perturbation must lie strictly before the observable")
    u = pert.relative_smatrix(g, k)
    u_inv = pert.star.inverse(u)
    rhs = pert.star.multi(u_inv, pert.relative_smatrix(g, f), u)
    return float((pert.relative_smatrix(g + k, f) - rhs).max_abs())


def weyl_taylor_defect(pert: Perturbation, f, phi, hbar: float = 1.0) -> float:
    """Coupling-Taylor coefficients of ``S(lambda F_f)(phi)`` against the Weyl closed form.

    The closed form is ``exp(i lam F_f(phi) / hbar) exp(-i lam^2 D(f, f) / (2 hbar))``
    with ``D`` the Dirac form of the Weyl module (Dirac picture only).
    """
    from math import factorial

    from .weyl import dirac_form

    if pert.picture != "dirac":
        raise ValueError("the Weyl closed form uses the Dirac picture")
    spec = pert.spec
    f = np.asarray(f, dtype=float)
    linear = complex(spec.pair(f, np.eye(spec.size) / spec.weights, np.asarray(phi, dtype=float)))
    quad = dirac_form(pert.props, f, f)
    got = evaluate_series(pert.smatrix(PolyFunctional.linear(spec, f)), phi, hbar)
    worst = 0.0
    for n in range(pert.caps[1] + 1):
        exact = sum((1j * linear / hbar) ** (n - 2 * b) / factorial(n - 2 * b)
                    * (-0.5j * quad / hbar) ** b / factorial(b) for b in range(n // 2 + 1))
        worst = max(worst, abs(got.get(n, 0.0) - exact))
    return float(worst)
