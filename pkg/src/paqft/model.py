"""Model spacetimes, propagators and linearized field operators.

Two backends are provided: a single oscillator on a time interval (``qm``)
and a scalar field on a circle of circumference ``L`` with a finite set of
spatial Fourier modes (``cylinder``).  Both use a uniform time grid with
trapezoid weights.  The cylinder is a direct sum of independent oscillators,
one per real Fourier mode, so every kernel is block diagonal in the mode index.

Grid layout: a flat index ``i = mode * n_t + time``.  Kernels are densities;
pairings apply one quadrature weight per index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class ModelSpec:
    """Grid and physical parameters of a model spacetime.

    Parameters
    ----------
    kind : {"qm", "cylinder"}
    mass : float
        Positive mass ``m``.
    T : float
        Half extent of the time interval ``[-T, T]``.
    n_t : int
        Number of time samples, at least 8.
    L : float
        Circumference of the spatial circle (cylinder only).
    n_modes : int
        Mode cutoff; modes ``-n_modes..n_modes`` are kept (cylinder only).
    """

    kind: str = "qm"
    mass: float = 1.0
    T: float = np.pi
    n_t: int = 256
    L: float = 2 * np.pi
    n_modes: int = 0

    def __post_init__(self):
        if self.kind not in ("qm", "cylinder"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not self.T > 0:
            raise ValueError("time extent must be positive")
        if int(self.n_t) != self.n_t or self.n_t < 8:
            raise ValueError("time grid needs at least 8 points")
        if self.kind == "cylinder":
            if not self.L > 0:
                raise ValueError("circumference must be positive")
            if self.n_modes < 0:
                raise ValueError("mode cutoff must be non-negative")

    @property
    def spacing(self) -> float:
        return 2 * self.T / (self.n_t - 1)

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(-self.T, self.T, self.n_t)

    @cached_property
    def time_weights(self) -> np.ndarray:
        w = np.full(self.n_t, self.spacing)
        w[0] = w[-1] = self.spacing / 2
        return w

    @cached_property
    def mode_numbers(self) -> np.ndarray:
        if self.kind == "qm":
            return np.array([0])
        return np.arange(-self.n_modes, self.n_modes + 1)

    @cached_property
    def frequencies(self) -> np.ndarray:
        """Oscillator frequency of each mode block."""
        if self.kind == "qm":
            return np.array([self.mass])
        k = 2 * np.pi * self.mode_numbers / self.L
        return np.sqrt(self.mass**2 + k**2)

    @property
    def n_blocks(self) -> int:
        return len(self.frequencies)

    @property
    def size(self) -> int:
        return self.n_blocks * self.n_t

    @cached_property
    def weights(self) -> np.ndarray:
        return np.tile(self.time_weights, self.n_blocks)

    @cached_property
    def point_times(self) -> np.ndarray:
        return np.tile(self.times, self.n_blocks)

    @cached_property
    def point_modes(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_blocks), self.n_t)

    def time_index(self, t: float) -> int:
        """Nearest grid index to time ``t``."""
        i = int(round((t + self.T) / self.spacing))
        if not 0 <= i < self.n_t:
            raise ValueError(f"time {t} outside the grid")
        return i

    def pair(self, f, K, g) -> complex:
        """Weighted bilinear pairing ``<f, K g>``."""
        w = self.weights
        return (np.asarray(f) * w) @ np.asarray(K) @ (w * np.asarray(g))


def _block_kernel(spec: ModelSpec, fn) -> np.ndarray:
    t = spec.times
    d = t[:, None] - t[None, :]
    out = np.zeros((spec.size, spec.size), dtype=np.result_type(fn(1.0, d), float))
    n = spec.n_t
    for b, om in enumerate(spec.frequencies):
        out[b * n:(b + 1) * n, b * n:(b + 1) * n] = fn(om, d)
    return out


def causal_function(omega, dt):
    """Commutator function of one mode: zero at ``dt=0`` with unit slope."""
    return np.sin(omega * dt) / omega


def causal_function_dt(omega, dt):
    """Derivative of :func:`causal_function` in its first time argument."""
    return np.cos(omega * dt)


def hadamard_function(omega, dt, beta=None):
    """Symmetric part of the two-point function; thermal if ``beta`` is set."""
    h = np.cos(omega * dt) / (2 * omega)
    if beta is not None:
        h = h / np.tanh(beta * omega / 2)
    return h


@dataclass(frozen=True)
class PropagatorSet:
    """All grid kernels of the free field, built from closed forms."""

    spec: ModelSpec
    retarded: np.ndarray
    advanced: np.ndarray
    hadamard: np.ndarray
    beta: float | None = None

    @property
    def causal(self) -> np.ndarray:
        return self.retarded - self.advanced

    @property
    def dirac(self) -> np.ndarray:
        return (self.retarded + self.advanced) / 2

    @property
    def wightman(self) -> np.ndarray:
        return 0.5j * self.causal + self.hadamard

    @property
    def feynman(self) -> np.ndarray:
        return 1j * self.dirac + self.hadamard

    def kernel(self, name: str) -> np.ndarray:
        """Contraction kernel by name; the names follow the product they define."""
        table = {
            "star": lambda: 0.5j * self.causal,
            "star_h": lambda: self.wightman,
            "dirac": lambda: 1j * self.dirac,
            "feynman": lambda: self.feynman,
            "hadamard": lambda: self.hadamard.astype(complex),
            "causal": lambda: self.causal.astype(complex),
        }
        if name not in table:
            raise KeyError(f"unknown kernel {name!r}")
        return table[name]()


def build_model(spec: ModelSpec, beta: float | None = None) -> PropagatorSet:
    """Closed-form propagators of the free field on ``spec``.

    ``beta`` selects a thermal symmetric part; ``None`` is the vacuum.
    """
    delta = _block_kernel(spec, causal_function)
    t = spec.times
    later = (t[:, None] > t[None, :]).astype(float)
    step = np.kron(np.eye(spec.n_blocks), later)
    retarded = step * delta
    advanced = -step.T * delta
    hadamard = _block_kernel(spec, lambda om, d: hadamard_function(om, d, beta))
    return PropagatorSet(spec, retarded, advanced, hadamard, beta)


def cauchy_solution(spec: ModelSpec, phi0, psi0, t0: float = 0.0) -> np.ndarray:
    """Free solution with value ``phi0`` and velocity ``psi0`` at time ``t0``.

    Built as ``Delta(t, t0) psi0 - d/ds Delta(t, s)|_{s=t0} phi0`` per mode.
    Returns a configuration of length ``spec.size``.
    """
    phi0 = np.atleast_1d(np.asarray(phi0, dtype=float))
    psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
    if phi0.shape != (spec.n_blocks,) or psi0.shape != (spec.n_blocks,):
        raise ValueError(f"Cauchy data must have {spec.n_blocks} mode entries")
    dt = spec.times - t0
    out = np.empty((spec.n_blocks, spec.n_t))
    for b, om in enumerate(spec.frequencies):
        # d/ds Delta(t, s) = -d/dt Delta(t, s)
        out[b] = causal_function(om, dt) * psi0[b] + causal_function_dt(om, dt) * phi0[b]
    return out.ravel()


@dataclass(frozen=True)
class GeneralizedLagrangian:
    """Polynomial density switched on by a cutoff ``density`` over the grid.

    ``terms`` holds ``(degree in phi, degree in phi-dot, coefficient)``.  The
    densities enter the field operator as potentials: a term ``c phi^p`` adds
    ``c p (p-1) phi^(p-2)`` to the multiplication part.  The free kinetic and
    mass terms are supplied by the model.
    """

    terms: tuple
    density: np.ndarray | None = None

    def __post_init__(self):
        for p, q, _ in self.terms:
            if p < 0 or q < 0:
                raise ValueError("monomial degrees must be non-negative")

    def cutoff(self, spec: ModelSpec) -> np.ndarray:
        if self.density is None:
            return np.ones(spec.size)
        f = np.asarray(self.density, dtype=float)
        if f.shape != (spec.size,):
            raise ValueError("cutoff density does not match the grid")
        return f

    def functional(self, spec: ModelSpec):
        """The smeared density as a polynomial functional."""
        from .functional import PolyFunctional

        f = self.cutoff(spec)
        out = PolyFunctional.zero(spec)
        for p, q, c in self.terms:
            if q == 0:
                out = out + PolyFunctional.local(spec, {p: c * f})
            elif p == 0 and q in (1, 2):
                out = out + _velocity_term(spec, c * f, q)
            else:
                raise NotImplementedError("mixed phi / phi-dot monomials are not represented")
        return out

    def __add__(self, other: "GeneralizedLagrangian") -> "GeneralizedLagrangian":
        if (self.density is None) != (other.density is None) or (
            self.density is not None and not np.array_equal(self.density, other.density)
        ):
            raise ValueError("only densities with the same cutoff can be added")
        return GeneralizedLagrangian(self.terms + other.terms, self.density)


def phi4(lam: float, density=None) -> GeneralizedLagrangian:
    return GeneralizedLagrangian(((4, 0, lam / 24.0),), density)


def mass_shift(mu: float, density=None) -> GeneralizedLagrangian:
    return GeneralizedLagrangian(((2, 0, mu / 2.0),), density)


def time_derivative_matrix(spec: ModelSpec) -> np.ndarray:
    """Second-order central difference in time, one-sided at the ends."""
    n, h = spec.n_t, spec.spacing
    d = np.zeros((n, n))
    idx = np.arange(1, n - 1)
    d[idx, idx + 1] = 1 / (2 * h)
    d[idx, idx - 1] = -1 / (2 * h)
    d[0, :3] = np.array([-3, 4, -1]) / (2 * h)
    d[-1, -3:] = np.array([1, -4, 3]) / (2 * h)
    return np.kron(np.eye(spec.n_blocks), d)


def _velocity_term(spec: ModelSpec, cf: np.ndarray, q: int):
    from .functional import PolyFunctional

    w = spec.weights
    D = time_derivative_matrix(spec)
    if q == 1:
        lin = (cf * w) @ D / w
        return PolyFunctional.linear(spec, lin)
    kern = np.einsum("x,xy,xz->yz", cf * w, D, D) / np.outer(w, w)
    return PolyFunctional.bilocal(spec, kern)


@dataclass(frozen=True)
class LinearizedOperator:
    """Discretized ``d^2/dt^2 + V(t)`` per mode block.

    ``potential`` is the multiplication part, sampled per grid point.  Row
    ``i`` of the stencil reads ``(u[i+1] - 2 cos(h k_i) u[i] + u[i-1]) /
    (h s_i)`` with ``k_i = sqrt(V_i)`` and ``s_i = sin(h k_i) / k_i``.  For a
    constant potential the closed-form mode functions satisfy it exactly; in
    general it is second-order accurate.  The discrete delta is
    ``delta_ij / h``.
    """

    spec: ModelSpec
    potential: np.ndarray
    cosines: np.ndarray = field(repr=False)
    scales: np.ndarray = field(repr=False)

    @classmethod
    def from_potential(cls, spec: ModelSpec, potential) -> "LinearizedOperator":
        v = np.asarray(potential, dtype=float)
        if v.shape != (spec.size,):
            raise ValueError("potential does not match the grid")
        h = spec.spacing
        k = np.sqrt(v.astype(complex))
        cos = np.cos(h * k).real
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(np.abs(k) > 0, np.sin(h * k) / np.where(k == 0, 1, k), h).real
        return cls(spec, v, cos, s)

    @cached_property
    def matrix(self) -> np.ndarray:
        n, h = self.spec.n_t, self.spec.spacing
        a = 1.0 / (h * self.scales)
        out = np.diag(-2 * self.cosines * a)
        upper = a[:-1].copy()
        lower = a[1:].copy()
        # no coupling across mode blocks
        upper[n - 1::n] = 0.0
        lower[n - 1::n] = 0.0
        out += np.diag(upper, 1) + np.diag(lower, -1)
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u


def linearize(spec: ModelSpec, lagrangian: GeneralizedLagrangian | None, phi=None) -> LinearizedOperator:
    """Linearized field operator at configuration ``phi``.

    The multiplication part at grid point ``i`` is ``omega_b^2 + d^2 U/dphi^2``
    where ``U`` is the cutoff potential density.  Cylinder backends accept only
    quadratic densities, which keep the mode blocks decoupled.
    """
    v = np.repeat(spec.frequencies**2, spec.n_t).astype(float)
    if lagrangian is None:
        return LinearizedOperator.from_potential(spec, v)
    if phi is None:
        phi = np.zeros(spec.size)
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (spec.size,):
        raise ValueError("configuration does not match the grid")
    f = lagrangian.cutoff(spec)
    for p, q, c in lagrangian.terms:
        if q != 0:
            raise NotImplementedError("velocity couplings change the kinetic stencil")
        if p < 2:
            continue
        if spec.kind == "cylinder" and p > 2:
            raise NotImplementedError("non-quadratic densities couple cylinder modes")
        v = v + c * p * (p - 1) * f * phi ** (p - 2)
    return LinearizedOperator.from_potential(spec, v)


def green_functions(op: LinearizedOperator) -> tuple[np.ndarray, np.ndarray]:
    """Retarded and advanced kernels by marching the stencil of ``op``.

    Column ``j`` of the retarded kernel starts from zero at ``t_j`` and
    marches forward; the advanced kernel marches backward.  Both satisfy
    ``op.matrix @ G = I / h`` on interior rows.
    """
    spec = op.spec
    n = spec.n_t
    N = spec.size
    gr = np.zeros((N, N))
    ga = np.zeros((N, N))
    c, s = op.cosines, op.scales
    for b in range(spec.n_blocks):
        o = b * n
        blk = slice(o, o + n)
        r = np.zeros((n, n))
        for i in range(n - 1):
            if i > 0:
                r[i + 1] = 2 * c[o + i] * r[i] - r[i - 1]
            r[i + 1, i] = s[o + i]
        a = np.zeros((n, n))
        for i in range(n - 1, 0, -1):
            if i < n - 1:
                a[i - 1] = 2 * c[o + i] * a[i] - a[i + 1]
            a[i - 1, i] = s[o + i]
        gr[blk, blk] = r
        ga[blk, blk] = a
    return gr, ga
