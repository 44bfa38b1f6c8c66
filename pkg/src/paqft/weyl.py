"""Exact Weyl algebra of the free field, quasi-free states and source S-matrices.

Elements are finite linear combinations of generators ``W(f) = exp(i F_f)``
with the product::

    W(f) W(g) = exp(-i hbar Delta(f, g) / 2) W(f + g)

All phases are closed-form quadratures of grid kernels, so the identities
checked here hold to rounding.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .model import PropagatorSet, linearize

KEY_DIGITS = 12


def _key(f: np.ndarray) -> bytes:
    # -0.0 and 0.0 must hash alike
    return (np.round(f, KEY_DIGITS) + 0.0).tobytes()


class WeylElement:
    """Finite combination ``sum c_f W(f)`` over a fixed free model."""

    def __init__(self, props: PropagatorSet, hbar: float = 1.0, terms=None):
        self.props = props
        self.hbar = float(hbar)
        self.terms: dict[bytes, tuple[np.ndarray, complex]] = {}
        for f, c in terms or ():
            self._add(np.asarray(f, dtype=float), complex(c))

    def _add(self, f, c):
        if f.shape != (self.props.spec.size,):
            raise ValueError("density does not match the grid")
        k = _key(f)
        if k in self.terms:
            c = self.terms[k][1] + c
            f = self.terms[k][0]
        if c == 0:
            self.terms.pop(k, None)
        else:
            self.terms[k] = (f, c)

    @classmethod
    def generator(cls, props, f, hbar=1.0, coeff=1.0):
        return cls(props, hbar, [(f, coeff)])

    @classmethod
    def unit(cls, props, hbar=1.0):
        return cls(props, hbar, [(np.zeros(props.spec.size), 1.0)])

    def _compatible(self, other):
        if other.props is not self.props or other.hbar != self.hbar:
            raise ValueError("Weyl elements belong to different models")

    def symplectic(self, f, g) -> float:
        return float(self.props.spec.pair(f, self.props.causal, g))

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return WeylElement(self.props, self.hbar, [(f, other * c) for f, c in self.terms.values()])
        self._compatible(other)
        out = WeylElement(self.props, self.hbar)
        for f, a in self.terms.values():
            for g, b in other.terms.values():
                phase = cmath.exp(-0.5j * self.hbar * self.symplectic(f, g))
                out._add(f + g, a * b * phase)
        return out

    __rmul__ = __mul__

    def __add__(self, other):
        self._compatible(other)
        out = WeylElement(self.props, self.hbar, self.terms.values())
        for f, c in other.terms.values():
            out._add(f, c)
        return out

    def __sub__(self, other):
        return self + other * -1.0

    def adjoint(self):
        return WeylElement(self.props, self.hbar, [(-f, np.conj(c)) for f, c in self.terms.values()])

    def inverse(self):
        """Inverse of a single generator times a non-zero coefficient."""
        if len(self.terms) != 1:
            raise ValueError("only monomials are inverted")
        (f, c), = self.terms.values()
        return WeylElement(self.props, self.hbar, [(-f, 1 / c)])

    def coefficient(self, f) -> complex:
        hit = self.terms.get(_key(np.asarray(f, dtype=float)))
        return hit[1] if hit else 0j

    def monomial(self):
        """``(density, coefficient)`` of a single-generator element."""
        if len(self.terms) != 1:
            raise ValueError("element is not a monomial")
        (f, c), = self.terms.values()
        return f, c

    def shift(self, steps: int):
        """Time translation by an integer number of grid steps."""
        n = self.props.spec.n_t
        out = WeylElement(self.props, self.hbar)
        for f, c in self.terms.values():
            blocks = f.reshape(-1, n)
            moved = np.zeros_like(blocks)
            if steps >= 0:
                lost = blocks[:, n - steps:] if steps else blocks[:, :0]
                moved[:, steps:] = blocks[:, :n - steps]
            else:
                lost = blocks[:, :-steps]
                moved[:, :steps] = blocks[:, -steps:]
            if np.any(lost != 0):
                raise ValueError("shift moves a density off the grid")
            out._add(moved.ravel(), c)
        return out

    def distance(self, other) -> float:
        """Max coefficient difference over the union of generators."""
        self._compatible(other)
        keys = set(self.terms) | set(other.terms)
        return max((abs(self.terms.get(k, (0, 0j))[1] - other.terms.get(k, (0, 0j))[1])
                    for k in keys), default=0.0)

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"WeylElement({len(self.terms)} generators, hbar={self.hbar})"


def weyl_product(a: WeylElement, b: WeylElement) -> WeylElement:
    return a * b


def quasifree_state(kernel, hbar: float = 1.0):
    """State ``W(f) -> exp(-hbar/2 K(f, f))`` extended linearly.

    ``kernel`` is a symmetric grid kernel or a :class:`PropagatorSet`, in
    which case its Hadamard function is used.
    """
    if isinstance(kernel, PropagatorSet):
        kernel = kernel.hadamard
    kernel = np.asarray(kernel, dtype=float)
    if not np.allclose(kernel, kernel.T, atol=1e-12, rtol=0):
        raise ValueError("covariance must be symmetric")

    def omega(a: WeylElement) -> complex:
        if a.hbar != hbar:
            raise ValueError("state and element use different hbar")
        spec = a.props.spec
        return sum(c * np.exp(-0.5 * hbar * spec.pair(f, kernel, f)) for f, c in a.terms.values())

    return omega


def gram_matrix(props: PropagatorSet, densities, hbar: float = 1.0, kernel=None) -> np.ndarray:
    """``M_ij = omega(W(f_i)^* W(f_j))``."""
    omega = quasifree_state(props.hadamard if kernel is None else kernel, hbar)
    gens = [WeylElement.generator(props, f, hbar) for f in densities]
    return np.array([[omega(a.adjoint() * b) for b in gens] for a in gens])


# ---------------------------------------------------------------------------
# source S-matrices


def dirac_form(props: PropagatorSet, f, g) -> float:
    return float(props.spec.pair(f, props.dirac, g))


def advanced_form(props: PropagatorSet, f, g) -> float:
    return float(props.spec.pair(f, props.advanced, g))


def source_smatrix(props: PropagatorSet, f, hbar: float = 1.0) -> WeylElement:
    """``exp(i F_f / hbar) exp(-i/(2 hbar) <f, D f>)`` with ``D`` the Dirac kernel."""
    f = np.asarray(f, dtype=float)
    phase = cmath.exp(-0.5j / hbar * dirac_form(props, f, f))
    return WeylElement.generator(props, f / hbar, hbar, phase)


def relative_smatrix(props: PropagatorSet, g, f, hbar: float = 1.0) -> WeylElement:
    """``S(g)^{-1} S(g + f)`` by Weyl products."""
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    return source_smatrix(props, g, hbar).inverse() * source_smatrix(props, g + f, hbar)


def relative_smatrix_closed(props: PropagatorSet, g, f, hbar: float = 1.0) -> WeylElement:
    """Closed form ``W(f/hbar) exp(-i/(2hbar) D(f,f)) exp(-i/hbar Adv(g, f))``."""
    f = np.asarray(f, dtype=float)
    phase = cmath.exp(-0.5j / hbar * dirac_form(props, f, f) - 1j / hbar * advanced_form(props, g, f))
    return WeylElement.generator(props, f / hbar, hbar, phase)


def factorization_defect(props: PropagatorSet, f, g, h, hbar: float = 1.0) -> complex:
    """Ratio of ``S(f+g+h)`` to ``S(f+g) S(g)^{-1} S(g+h)``; 1 when factorization holds."""
    f, g, h = (np.asarray(x, dtype=float) for x in (f, g, h))
    lhs = source_smatrix(props, f + g + h, hbar)
    rhs = source_smatrix(props, f + g, hbar) * source_smatrix(props, g, hbar).inverse() \
        * source_smatrix(props, g + h, hbar)
    (_, a), (_, b) = lhs.monomial(), rhs.monomial()
    return a / b


def predicted_factorization_phase(props: PropagatorSet, f, h, hbar: float = 1.0) -> complex:
    """Phase left over by causal factorization when ``f`` reaches the past of ``h``."""
    return cmath.exp(-1j / hbar * advanced_form(props, f, h))


# ---------------------------------------------------------------------------
# on-shell ideal


def onshell_ideal_check(props: PropagatorSet, f, hbar: float = 1.0, probes=()) -> dict:
    """State and commutator residuals of ``W(P f)`` for the free operator ``P``."""
    spec = props.spec
    f = np.asarray(f, dtype=float)
    pf = linearize(spec, None).matrix @ f
    omega = quasifree_state(props.hadamard, hbar)
    state = abs(omega(WeylElement.generator(props, pf, hbar)) - 1)
    brackets = [abs(spec.pair(pf, props.causal, g)) for g in probes]
    return {"state": float(state), "commutator": float(max(brackets, default=0.0))}


# ---------------------------------------------------------------------------
# complex structure


@dataclass(frozen=True)
class ComplexStructureReport:
    """Complex structure of a covariance in orthonormal coordinates of ``(.,.)_H``.

    Reduced coordinates of a density are ``x = basis.T @ f``, scaled so that
    ``H(f, g) = x_f . x_g`` for ``f, g`` in the range of ``H``.
    """

    A: np.ndarray
    J: np.ndarray
    abs_A: np.ndarray
    basis: np.ndarray
    norm_A: float
    j_square_defect: float
    orthogonality_defect: float
    purity_defect: float
    pure: bool

    def coordinates(self, f) -> np.ndarray:
        return self.basis.T @ np.asarray(f)


def _pairing_structure(dim: int) -> np.ndarray:
    if dim % 2:
        raise ValueError("degenerate block has odd dimension; no anti-involution exists")
    J = np.zeros((dim, dim))
    for i in range(0, dim, 2):
        J[i, i + 1] = -1.0
        J[i + 1, i] = 1.0
    return J


def complex_structure(H, Delta, weights=None, purity_tol: float = 1e-8, rank_tol: float = 1e-10):
    """Polar decomposition ``A = -J |A|`` of ``<f, Delta g> = 2 (f, A g)_H``.

    ``H`` and ``Delta`` are grid kernels (weighted by ``weights``) or plain
    bilinear-form matrices.  Work happens on the range of ``H``.
    """
    H = np.asarray(H, dtype=float)
    D = np.asarray(Delta, dtype=float)
    if not np.allclose(H, H.T, atol=1e-12, rtol=0):
        raise ValueError("covariance must be symmetric")
    if not np.allclose(D, -D.T, atol=1e-12, rtol=0):
        raise ValueError("commutator form must be antisymmetric")
    w = np.ones(len(H)) if weights is None else np.asarray(weights, dtype=float)
    Hw = w[:, None] * H * w[None, :]
    Dw = w[:, None] * D * w[None, :]
    vals, vecs = np.linalg.eigh(Hw)
    if vals.min() < -rank_tol * max(vals.max(), 1.0):
        raise ValueError("covariance is not positive")
    keep = vals > rank_tol * vals.max()
    lam, U = vals[keep], vecs[:, keep]
    inv_sqrt = 1 / np.sqrt(lam)
    Dx = inv_sqrt[:, None] * (U.T @ Dw @ U) * inv_sqrt[None, :]
    A = 0.5 * Dx
    A = 0.5 * (A - A.T)
    dim = len(A)
    # |A| and J via the real Schur-free route: eigen-decompose the PSD A^T A
    s2, V = np.linalg.eigh(A.T @ A)
    s = np.sqrt(np.clip(s2, 0, None))
    scale = max(s.max(initial=0.0), 1.0)
    regular = s > 1e-12 * scale
    abs_A = (V * s) @ V.T
    Vr, Vk = V[:, regular], V[:, ~regular]
    J = np.zeros((dim, dim))
    if regular.any():
        J += -(A @ Vr) / s[regular] @ Vr.T
    if (~regular).any():
        J += Vk @ _pairing_structure(Vk.shape[1]) @ Vk.T
    eye = np.eye(dim)
    purity = float(np.abs(Dx @ J - 2 * eye).max()) if dim else 0.0
    return ComplexStructureReport(
        A=A,
        J=J,
        abs_A=abs_A,
        basis=U * np.sqrt(lam)[None, :],
        norm_A=float(np.linalg.norm(A, 2)) if dim else 0.0,
        j_square_defect=float(np.abs(J @ J + eye).max()) if dim else 0.0,
        orthogonality_defect=float(np.abs(J.T @ J - eye).max()) if dim else 0.0,
        purity_defect=purity,
        pure=purity <= purity_tol,
    )


def holomorphic_blocks(report: ComplexStructureReport) -> dict:
    """Blocks of the two-point form between holomorphic and antiholomorphic parts.

    With ``P = (1 - iJ)/2`` and ``Q = (1 + iJ)/2`` returns the max-norm of
    ``Q^T W P - W`` (surviving block) and of the other three blocks, where
    ``W = i Dx/2 + 1`` is the two-point form in reduced coordinates.
    """
    J = report.J
    eye = np.eye(len(J))
    W = 1j * report.A + eye
    P = 0.5 * (eye - 1j * J)
    Q = 0.5 * (eye + 1j * J)

    def norm(x):
        return float(np.abs(x).max()) if x.size else 0.0

    return {
        "surviving": norm(Q.T @ W @ P - W),
        "zz": norm(P.T @ W @ P),
        "zbar_zbar": norm(Q.T @ W @ Q),
        "z_zbar": norm(P.T @ W @ Q),
    }


# ---------------------------------------------------------------------------
# interaction-picture cocycle


def switch_function(t, eps: float) -> np.ndarray:
    """Smooth switch: 0 for ``t <= -2 eps``, 1 for ``t >= -eps``."""
    x = (np.asarray(t, dtype=float) + 2 * eps) / eps

    def bump(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1 / y[pos])
        return out

    a, b = bump(x), bump(1 - x)
    return a / (a + b)


def switch_derivative(t, eps: float) -> np.ndarray:
    x = (np.asarray(t, dtype=float) + 2 * eps) / eps
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    y = x[inside]
    a, b = np.exp(-1 / y), np.exp(-1 / (1 - y))
    da, db = a / y**2, -b / (1 - y) ** 2
    out[inside] = (da * (a + b) - a * (da + db)) / (a + b) ** 2 / eps
    return out


def shift_density(spec, f, steps: int) -> np.ndarray:
    """``f(t - steps * h)``; samples entering from the left edge repeat the edge value."""
    n = spec.n_t
    blocks = np.asarray(f, dtype=float).reshape(-1, n)
    out = np.empty_like(blocks)
    if steps >= 0:
        out[:, steps:] = blocks[:, :n - steps]
        out[:, :steps] = blocks[:, :1]
    else:
        out[:, :steps] = blocks[:, -steps:]
        out[:, steps:] = blocks[:, -1:]
    return out.ravel()


@dataclass
class CocycleElement:
    steps: int
    element: WeylElement
    source: np.ndarray
    switch: np.ndarray


def cocycle(props: PropagatorSet, h, eps: float, steps: int, hbar: float = 1.0) -> CocycleElement:
    """``U_t = S_{h chi}(h (chi_t - chi))`` for ``t = steps`` grid spacings."""
    spec = props.spec
    h = np.broadcast_to(np.asarray(h, dtype=float), (spec.n_blocks,))
    chi = switch_function(spec.point_times, eps)
    profile = np.repeat(h, spec.n_t)
    source = profile * chi
    moved = profile * shift_density(spec, chi, steps)
    u = relative_smatrix(props, source, moved - source, hbar)
    return CocycleElement(steps, u, source, chi)


def cocycle_defect(props: PropagatorSet, h, eps: float, t_steps: int, s_steps: int,
                   hbar: float = 1.0) -> float:
    """Distance between ``U_{t+s}`` and ``U_t alpha_t(U_s)``."""
    ut = cocycle(props, h, eps, t_steps, hbar).element
    us = cocycle(props, h, eps, s_steps, hbar).element
    uts = cocycle(props, h, eps, t_steps + s_steps, hbar).element
    return uts.distance(ut * us.shift(t_steps))


@dataclass(frozen=True)
class InteractionHamiltonian:
    """Generator of the cocycle: a linear functional ``<density, phi>`` plus a constant."""

    density: np.ndarray
    constant: float
    expected_density: np.ndarray

    @property
    def deviation(self) -> float:
        return float(np.abs(self.density - self.expected_density).max())


def interaction_hamiltonian(props: PropagatorSet, h, eps: float, hbar: float = 1.0) -> InteractionHamiltonian:
    """``hbar d/(i dt) U_t`` at ``t = 0`` by a nine-point central difference.

    ``U_t = c(t) W(a(t))`` gives the density ``hbar a'(0)`` and the constant
    ``hbar c'(0) / i``.
    """
    spec = props.spec
    dt = spec.spacing
    # eighth-order first-derivative weights on shifts -4..4
    half = {1: 4 / 5, 2: -1 / 5, 3: 4 / 105, 4: -1 / 280}
    stencil = {**half, **{-k: -v for k, v in half.items()}}
    dens = np.zeros(spec.size)
    dc = 0j
    for k, wk in stencil.items():
        f, c = cocycle(props, h, eps, k, hbar).element.monomial()
        dens += wk * f / dt
        dc += wk * c / dt
    h_arr = np.repeat(np.broadcast_to(np.asarray(h, dtype=float), (spec.n_blocks,)), spec.n_t)
    expected = -h_arr * switch_derivative(spec.point_times, eps)
    return InteractionHamiltonian(hbar * dens, float((hbar * dc / 1j).real), expected)
