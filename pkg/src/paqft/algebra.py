"""Products and brackets on polynomial functionals.

Every deformed product here has the shape::

    F *_P G = sum_n hbar^n / n! <F^(n), P^(x)n G^(n)>

for a contraction kernel ``P``.  It is evaluated on vertex terms by
enumerating contraction patterns: a pattern is a matrix ``k[a, b]`` counting
lines between vertex ``a`` of ``F`` and vertex ``b`` of ``G``, weighted by::

    prod 1/k_ab!  *  prod n_a!/(n_a - k_a)!  *  prod m_b!/(m_b - l_b)!

where ``k_a``, ``l_b`` are the row and column sums.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .functional import FormalSeries, PolyFunctional, assemble
from .model import (
    GeneralizedLagrangian,
    ModelSpec,
    PropagatorSet,
    cauchy_solution,
    green_functions,
    linearize,
)

PRODUCT_KERNELS = {
    "star": "star",
    "star_h": "star_h",
    "timeordered_d": "dirac",
    "timeordered_f": "feynman",
}


@lru_cache(maxsize=None)
def contraction_patterns(left: tuple, right: tuple) -> tuple:
    """All line patterns between two vertex lists with their weights.

    Returns a tuple of ``(n_lines, weight, edges)`` where ``edges`` lists
    ``(a, b, k_ab)`` with ``k_ab > 0``.
    """
    cells = [(a, b) for a in range(len(left)) for b in range(len(right))]
    out = []

    def walk(i, rows, cols, chosen):
        if i == len(cells):
            n = sum(k for _, _, k in chosen)
            weight = 1.0
            for _, _, k in chosen:
                weight /= math.factorial(k)
            for m, r in zip(left, rows):
                weight *= math.factorial(m) // math.factorial(m - r)
            for m, c in zip(right, cols):
                weight *= math.factorial(m) // math.factorial(m - c)
            out.append((n, weight, tuple(chosen)))
            return
        a, b = cells[i]
        top = min(left[a] - rows[a], right[b] - cols[b])
        for k in range(top + 1):
            rows[a] += k
            cols[b] += k
            walk(i + 1, rows, cols, chosen + [(a, b, k)] if k else chosen)
            rows[a] -= k
            cols[b] -= k

    walk(0, [0] * len(left), [0] * len(right), [])
    return tuple(sorted(out, key=lambda e: e[0]))


def bidiff_product(F: PolyFunctional, G: PolyFunctional, kernel, caps=(8, 0),
                   lambda_weight: int = 0, powers=None) -> FormalSeries:
    """``sum_n hbar^n/n! <F^(n), P^n G^(n)>`` as a series in hbar.

    The result has coefficients at keys ``(n, 0)``; orders beyond the hbar
    cap are never formed.  ``powers`` replaces the entrywise power ``P**k``
    used for ``k`` parallel lines between two vertices.
    """
    F._check(G)
    spec = F.spec
    kernel = np.asarray(kernel)
    out = FormalSeries(None, caps, lambda_weight)
    buckets: dict[int, PolyFunctional] = {}
    for ma, ca in F.terms.items():
        for mb, cb in G.terms.items():
            for n, weight, edges in contraction_patterns(ma, mb):
                if n > caps[0]:
                    break
                lines = [((0, a), (1, b), k) for a, b, k in edges]
                mult, coeff = assemble(spec, [(ma, ca), (mb, cb)], lines, kernel, powers)
                acc = buckets.setdefault(n, PolyFunctional(spec))
                acc._accumulate(mult, weight * coeff)
    for n, value in buckets.items():
        out._put((n, 0), value)
    return out


def _as_functional(spec: ModelSpec, x) -> PolyFunctional:
    if isinstance(x, PolyFunctional):
        return x
    return PolyFunctional.constant(spec, x)


def series_product(A: FormalSeries, B: FormalSeries, kernel, spec: ModelSpec, powers=None) -> FormalSeries:
    """Deformed product of two series with functional coefficients."""

    def op(a, b):
        fa, fb = _as_functional(spec, a), _as_functional(spec, b)
        return bidiff_product(fa, fb, kernel, A.caps, A.lambda_weight, powers)

    return A.multiply(B, op)


class ProductContext:
    """Named deformed products over one free model.

    ``kind`` is one of ``star``, ``star_h``, ``timeordered_d``,
    ``timeordered_f`` or ``pointwise``; a custom kernel may be passed instead.
    """

    def __init__(self, props: PropagatorSet, kind: str = "star", kernel=None, powers=None):
        self.props = props
        self.spec = props.spec
        self.kind = kind
        self.powers = powers
        if kernel is not None:
            self.kernel = np.asarray(kernel, dtype=complex)
        elif kind == "pointwise":
            self.kernel = np.zeros((self.spec.size, self.spec.size), dtype=complex)
        else:
            self.kernel = props.kernel(PRODUCT_KERNELS[kind])

    def __call__(self, F, G, caps=(8, 0), lambda_weight=0) -> FormalSeries:
        if isinstance(F, FormalSeries) or isinstance(G, FormalSeries):
            if not isinstance(F, FormalSeries):
                F = FormalSeries.scalar(F, G.caps, G.lambda_weight)
            if not isinstance(G, FormalSeries):
                G = FormalSeries.scalar(G, F.caps, F.lambda_weight)
            return series_product(F, G, self.kernel, self.spec, self.powers)
        return bidiff_product(_as_functional(self.spec, F), _as_functional(self.spec, G),
                              self.kernel, caps, lambda_weight, self.powers)

    def op(self, caps, lambda_weight=0):
        """Coefficient product usable with :meth:`FormalSeries.multiply`."""

        def product(a, b):
            return bidiff_product(_as_functional(self.spec, a), _as_functional(self.spec, b),
                                  self.kernel, caps, lambda_weight, self.powers)

        return product

    def unit(self):
        return PolyFunctional.constant(self.spec, 1.0)

    def inverse(self, S: FormalSeries) -> FormalSeries:
        return S.inverse(self.op(S.caps, S.lambda_weight), unit=self.unit())

    def exp(self, X: FormalSeries) -> FormalSeries:
        return X.exp(self.op(X.caps, X.lambda_weight), unit=self.unit())

    def multi(self, *factors: FormalSeries) -> FormalSeries:
        out = factors[0]
        for f in factors[1:]:
            out = self(out, f)
        return out


def star(props, F, G, caps=(8, 0)):
    return ProductContext(props, "star")(F, G, caps)


def star_h(props, F, G, caps=(8, 0)):
    return ProductContext(props, "star_h")(F, G, caps)


def timeordered_d(props, F, G, caps=(8, 0)):
    return ProductContext(props, "timeordered_d")(F, G, caps)


def timeordered_f(props, F, G, caps=(8, 0)):
    return ProductContext(props, "timeordered_f")(F, G, caps)


# ---------------------------------------------------------------------------
# gauge transformations


def laplacian(F: PolyFunctional, kernel) -> PolyFunctional:
    """``<K, F^(2)>``: one internal line with kernel ``K``."""
    spec = F.spec
    kernel = np.asarray(kernel)
    out = PolyFunctional(spec)
    for mult, c in F.terms.items():
        for a, b in itertools.combinations_with_replacement(range(len(mult)), 2):
            if a == b:
                if mult[a] < 2:
                    continue
                weight = mult[a] * (mult[a] - 1)
            else:
                weight = 2 * mult[a] * mult[b]
            res = assemble(spec, [(mult, c)], [((0, a), (0, b), 1)], kernel)
            out._accumulate(res[0], weight * res[1])
    return out


def alpha_transform(F, kernel, sign: int = 1, caps=(8, 0), lambda_weight: int = 0) -> FormalSeries:
    """``exp(sign * hbar/2 <K, d^2/dphi^2>) F`` as a terminating series.

    ``F`` may be a functional or a series; series coefficients are
    transformed and shifted in hbar.
    """
    kernel = np.asarray(kernel)
    if not np.allclose(kernel, kernel.T, atol=1e-13, rtol=0):
        raise ValueError("gauge kernel must be symmetric")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if isinstance(F, FormalSeries):
        out = FormalSeries(None, F.caps, F.lambda_weight)
        for (j, k), c in F.coeffs.items():
            if not isinstance(c, PolyFunctional):
                out._put((j, k), c)
                continue
            sub = alpha_transform(c, kernel, sign, F.caps, F.lambda_weight)
            for (n, _), v in sub.coeffs.items():
                if out.grade((j + n, k)) <= F.caps[0]:
                    out._put((j + n, k), v)
        return out
    out = FormalSeries(None, caps, lambda_weight)
    term = F
    for n in range(caps[0] + 1):
        if term.is_zero():
            break
        out._put((n, 0), term)
        term = laplacian(term, kernel) * (sign * 0.5 / (n + 1))
    return out


# ---------------------------------------------------------------------------
# brackets


def _quadratic(lagrangian: GeneralizedLagrangian | None) -> bool:
    return lagrangian is None or all(p <= 2 and q == 0 for p, q, _ in lagrangian.terms)


def commutator_kernel(spec: ModelSpec, lagrangian: GeneralizedLagrangian | None = None, phi=None):
    """Retarded minus advanced kernel of the linearized operator at ``phi``."""
    gr, ga = green_functions(linearize(spec, lagrangian, phi))
    return gr - ga


def peierls_bracket(F: PolyFunctional, G: PolyFunctional, props: PropagatorSet | None = None,
                    lagrangian: GeneralizedLagrangian | None = None, phi=None):
    """``<F^(1)(phi), D(phi) G^(1)(phi)>`` with ``D`` the commutator kernel.

    Returns a functional of ``phi`` for quadratic actions and a number for
    interacting ones, where ``phi`` is required.
    """
    spec = F.spec
    if _quadratic(lagrangian):
        if lagrangian is None and props is not None:
            kernel = props.causal
        else:
            kernel = commutator_kernel(spec, lagrangian)
        first = bidiff_product(F, G, kernel, caps=(1, 0)).get((1, 0), PolyFunctional(spec))
        if phi is None:
            return first
        return first(phi)
    if phi is None:
        raise ValueError("an interacting bracket needs a background configuration")
    kernel = commutator_kernel(spec, lagrangian, phi)
    fa = F.derivative_kernel(phi, 1)
    gb = G.derivative_kernel(phi, 1)
    return spec.pair(fa, kernel, gb)


def cauchy_gradient(F: PolyFunctional, phi0, psi0, t0: float = 0.0):
    """Gradient of ``F`` composed with the free Cauchy map at data ``(phi0, psi0)``.

    Returns ``(d/dphi0, d/dpi0)`` with one entry per mode.
    """
    spec = F.spec
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
    sol = cauchy_solution(spec, phi0, psi0, t0)
    grad = F.derivative_kernel(sol, 1)
    eye = np.eye(spec.n_blocks)
    zero = np.zeros(spec.n_blocks)
    w = spec.weights
    d_phi = np.array([(grad * w) @ cauchy_solution(spec, e, zero, t0) for e in eye])
    d_pi = np.array([(grad * w) @ cauchy_solution(spec, zero, e, t0) for e in eye])
    return d_phi, d_pi


def canonical_bracket(grad_f, grad_g) -> complex:
    """``sum (dF/dphi0 dG/dpi0 - dF/dpi0 dG/dphi0)`` over modes."""
    f_phi, f_pi = (np.asarray(x) for x in grad_f)
    g_phi, g_pi = (np.asarray(x) for x in grad_g)
    if f_phi.shape != g_phi.shape or f_pi.shape != g_pi.shape:
        raise ValueError("gradients live on different phase spaces")
    return complex(np.sum(f_phi * g_pi - f_pi * g_phi))


# ---------------------------------------------------------------------------
# causal ordering


class OverlappingSupports(ValueError):
    """Raised when a causal-ordering check gets supports that are not separated."""


def causal_ordering_check(props: PropagatorSet, F: PolyFunctional, G: PolyFunctional,
                          caps=(8, 0)) -> float:
    """Max-norm distance between the Dirac time-ordered product and the ordered star product.

    ``F`` later than ``G`` compares with ``F * G``; ``G`` later compares with
    ``G * F``.  Disjoint mode sets compare with both orders.
    """
    sf, sg = F.support(), G.support()
    tprod = timeordered_d(props, F, G, caps)
    if sf is None or sg is None:
        return tprod.distance(star(props, F, G, caps))
    if not set(sf.modes) & set(sg.modes):
        return max(tprod.distance(star(props, F, G, caps)), tprod.distance(star(props, G, F, caps)))
    if sg.precedes(sf):
        return tprod.distance(star(props, F, G, caps))
    if sf.precedes(sg):
        return tprod.distance(star(props, G, F, caps))
    raise OverlappingSupports(
        f"supports [{sf.t_min:.4g}, {sf.t_max:.4g}] and [{sg.t_min:.4g}, {sg.t_max:.4g}] overlap in time"
    )
