"""Extension of homogeneous distributions across the origin.

Distributions are finite sums ``c |x|^{-a} log^j |x|`` on ``R^d \\ {0}`` (in
``d = 1`` optionally odd, ``c sign(x) |x|^{-a} log^j |x|``).  Pairings reduce to
radial integrals against a test-function profile ``G(r)``::

    <t, f> = sum c int_0^inf r^{d-1-a} log^j(r) G(r) dr

with ``G(r) = f(r) +- f(-r)`` in one dimension and the sphere area times
the radial profile otherwise.  Taylor data of ``G`` at 0 is exact, so small-r
pieces are integrated term by term in closed form instead of by cancelling
floating-point subtractions.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

POLE_ORDER_CAP = 3
SERIES_RADIUS = 0.1
SERIES_TERMS = 24
QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach its tolerance."""


def _quad(fn, a, b, points=None):
    if points:
        pts = [p for p in points if a < p < b]
    else:
        pts = None
    # the error estimate is checked below; quad's own warning is redundant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if pts and np.isfinite(b):
            val, err = integrate.quad(fn, a, b, points=pts, **QUAD_OPTS)
        else:
            val, err = integrate.quad(fn, a, b, **QUAD_OPTS)
    if not np.isfinite(val) or err > 1e-9 * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature on [{a}, {b}] gave {val} +- {err}")
    return val


# ---------------------------------------------------------------------------
# test functions


class TestFunction:
    """Smooth test function with exact Taylor data at the origin.

    In one dimension ``value`` takes ``x``; in higher dimensions test
    functions are radial and ``value`` takes ``r = |x|``.
    """

    __test__ = False

    def __init__(self, value, derivatives, scale: float = 1.0, support: float | None = None,
                 radial: bool = False, label: str = ""):
        self._value = value
        self._derivatives = derivatives
        self.scale = float(scale)
        self.support = support
        self.radial = radial
        self.label = label

    def __call__(self, x):
        return self._value(np.asarray(x, dtype=float))

    def derivatives(self, n: int) -> np.ndarray:
        """``f^(k)(0)`` for ``k = 0..n``."""
        return np.asarray(self._derivatives(n), dtype=float)

    def scaled(self, lam: float) -> "TestFunction":
        """``x -> f(x / lam)``."""
        inv = 1.0 / lam
        return TestFunction(
            lambda x: self._value(x * inv),
            lambda n: self.derivatives(n) * inv ** np.arange(n + 1),
            self.scale * lam,
            None if self.support is None else self.support * lam,
            self.radial,
            f"{self.label}(x/{lam:g})",
        )

    def __add__(self, other: "TestFunction") -> "TestFunction":
        sup = None if self.support is None or other.support is None else max(self.support, other.support)
        return TestFunction(
            lambda x: self(x) + other(x),
            lambda n: self.derivatives(n) + other.derivatives(n),
            max(self.scale, other.scale),
            sup,
            self.radial and other.radial,
        )

    def __mul__(self, c: float) -> "TestFunction":
        return TestFunction(lambda x: c * self(x), lambda n: c * self.derivatives(n),
                            self.scale, self.support, self.radial, self.label)

    __rmul__ = __mul__


def gaussian(center: float = 0.0, width: float = 1.0, amplitude: float = 1.0, radial: bool = False) -> TestFunction:
    """``amplitude * exp(-((x - center)/width)^2)``; radial ones must be centred."""
    if radial and center != 0:
        raise ValueError("radial test functions are centred at the origin")

    def value(x):
        return amplitude * np.exp(-(((x - center) / width) ** 2))

    def derivs(n):
        u = -center / width
        base = amplitude * math.exp(-u * u)
        return np.array([base * (-1 / width) ** k * special.eval_hermite(k, u) for k in range(n + 1)])

    return TestFunction(value, derivs, scale=abs(center) + width, radial=radial,
                        label=f"gauss({center:g},{width:g})")


def smoothstep(u, order: int):
    """``C^order`` polynomial step from 0 at ``u <= 0`` to 1 at ``u >= 1``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    p = order
    acc = np.zeros_like(u)
    for k in range(p + 1):
        acc += math.comb(p + k, k) * math.comb(2 * p + 1, p - k) * (-u) ** k
    return u ** (p + 1) * acc


@dataclass(frozen=True)
class Bump:
    """Radial cutoff: 1 on ``[0, inner]``, 0 beyond ``outer``, polynomial in between."""

    inner: float = 0.25
    outer: float = 1.0
    order: int = 6

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("bump needs 0 < inner < outer")

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        return 1.0 - smoothstep((r - self.inner) / (self.outer - self.inner), self.order)


def polynomial_bump(coeffs, bump: Bump = Bump(), radial: bool = False) -> TestFunction:
    """``sum coeffs[k] x^k`` times a bump; Taylor data at 0 is the polynomial's."""
    coeffs = np.asarray(coeffs, dtype=float)

    def value(x):
        return np.polynomial.polynomial.polyval(x, coeffs) * bump(x)

    def derivs(n):
        out = np.zeros(n + 1)
        for k in range(min(n, len(coeffs) - 1) + 1):
            out[k] = coeffs[k] * math.factorial(k)
        return out

    return TestFunction(value, derivs, scale=bump.outer, support=bump.outer, radial=radial,
                        label="poly*bump")


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class HomogeneousTerm:
    coeff: complex
    a: float
    log_power: int = 0
    odd: bool = False

    def __post_init__(self):
        if self.log_power < 0:
            raise ValueError("log power must be non-negative")


@dataclass(frozen=True)
class ModelDistribution:
    """Sum of homogeneous terms ``c |x|^{-a} log^j|x|`` on ``R^d \\ {0}``."""

    dim: int
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.dim > 1 and any(t.odd for t in self.terms):
            raise ValueError("odd angular parts exist only in one dimension")

    @classmethod
    def power(cls, a: float, dim: int = 1, coeff: complex = 1.0, log_power: int = 0, odd: bool = False):
        return cls(dim, (HomogeneousTerm(coeff, a, log_power, odd),))

    def __add__(self, other):
        if other.dim != self.dim:
            raise ValueError("dimensions differ")
        return ModelDistribution(self.dim, self.terms + other.terms)

    def scaling_degree(self) -> float:
        return max((t.a for t in self.terms if t.coeff != 0), default=-math.inf)

    def divergence(self) -> float:
        return self.scaling_degree() - self.dim

    def extension_order(self) -> int:
        """``floor(sd - d)``, or -1 when no subtraction is needed."""
        div = self.divergence()
        return int(math.floor(div)) if div >= 0 else -1

    def regularized(self, zeta: complex) -> "ModelDistribution":
        return ModelDistribution(self.dim, tuple(
            HomogeneousTerm(t.coeff, t.a - zeta, t.log_power, t.odd) for t in self.terms))


def parse_distribution(tag: str, dim: int = 1) -> ModelDistribution:
    """``abs_pow:-a`` / ``abs_pow:-a:log=j`` / ``sign_pow:-a`` tags."""
    head, _, rest = tag.partition(":")
    parts = rest.split(":")
    try:
        expo = float(parts[0])
    except ValueError as exc:
        raise ValueError(f"bad exponent in {tag!r}") from exc
    logs = 0
    for p in parts[1:]:
        key, _, val = p.partition("=")
        if key != "log":
            raise ValueError(f"unknown modifier {p!r}")
        logs = int(val)
    if head == "abs_pow":
        return ModelDistribution.power(-expo, dim, log_power=logs)
    if head == "sign_pow":
        return ModelDistribution.power(-expo, dim, log_power=logs, odd=True)
    raise ValueError(f"unknown distribution family {head!r}")


def sphere_area(dim: int) -> float:
    return 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def _profile(term: HomogeneousTerm, dim: int, f: TestFunction):
    """Radial profile ``G`` and its Taylor coefficients ``g_k``."""
    if dim == 1:
        if f.radial:
            raise ValueError("one-dimensional pairings take ordinary test functions")
        sgn = -1.0 if term.odd else 1.0

        def G(r):
            return f(r) + sgn * f(-r)

        def taylor(n):
            d = f.derivatives(n)
            k = np.arange(n + 1)
            fact = np.array([math.factorial(i) for i in k], dtype=float)
            return (1 + sgn * (-1.0) ** k) * d / fact

        return G, taylor
    if not f.radial:
        raise ValueError("pairings in d > 1 take radial test functions")
    area = sphere_area(dim)

    def G(r):
        return area * f(r)

    def taylor(n):
        d = f.derivatives(n)
        fact = np.array([math.factorial(i) for i in range(n + 1)], dtype=float)
        return area * d / fact

    return G, taylor


def _log_moment(p: complex, m: int, rho: float) -> complex:
    """``int_0^rho r^{p-1} log^m r dr`` for ``Re p > 0``."""
    lr = math.log(rho)
    total = 0j
    for i in range(m + 1):
        total += (-1) ** i * math.perm(m, i) * lr ** (m - i) / p ** (i + 1)
    return complex(rho**p * total)


def _remainder_integral(G, taylor, s: float, m: int, subtract: int, rho: float, outer,
                        cutoff=None, points=None) -> float:
    """``int_0^outer r^{s-1} log^m r [G(r) - T(r) cutoff(r)] dr``.

    ``T`` is the Taylor polynomial of ``G`` to order ``subtract``; the
    cutoff equals 1 on ``[0, rho]``, where the integrand is summed from the
    Taylor series beyond ``subtract``.
    """
    g = taylor(subtract + SERIES_TERMS)
    small = 0.0
    for k in range(subtract + 1, len(g)):
        if g[k] != 0:
            p = s + k
            if p <= 0:
                raise ValueError("remainder is not integrable; subtraction order too low")
            small += g[k] * _log_moment(p, m, rho).real
    head = g[: subtract + 1]

    def integrand(r):
        poly = np.polynomial.polynomial.polyval(r, head) if subtract >= 0 else 0.0
        cut = 1.0 if cutoff is None else cutoff(r)
        return r ** (s - 1) * math.log(r) ** m * (G(r) - poly * cut)

    big = _quad(integrand, rho, outer, points)
    return small + big


def _series_radius(f: TestFunction, cap: float) -> float:
    # the Taylor series of f is only trusted well inside its own length scale
    return min(cap, SERIES_RADIUS * min(1.0, f.scale))


def _scale_points(f: TestFunction, extra=()) -> list:
    return [f.scale, 4 * f.scale, *extra]


def _outer_range(f: TestFunction) -> float:
    if f.support is not None:
        return f.support
    return np.inf


def _tail(G, s, m, start, f: TestFunction) -> float:
    """``int_start^inf r^{s-1} log^m r G(r) dr``, split at the test-function scale."""
    end = _outer_range(f)
    if end <= start:
        return 0.0

    def integrand(r):
        return r ** (s - 1) * math.log(r) ** m * G(r)

    if np.isfinite(end):
        return _quad(integrand, start, end)
    mid = max(start, 12 * f.scale)
    val = _quad(integrand, start, mid) if mid > start else 0.0
    return val + _quad(integrand, mid, np.inf)


def pair(t: ModelDistribution, f: TestFunction) -> complex:
    """Direct pairing; valid only when the scaling degree is below the dimension."""
    if t.extension_order() >= 0:
        raise ValueError("distribution is not locally integrable; extend it first")
    total = 0j
    for term in t.terms:
        G, taylor = _profile(term, t.dim, f)
        s = t.dim - term.a
        val = _remainder_integral(G, taylor, s, term.log_power, -1, _series_radius(f, 1.0), 1.0,
                                  points=_scale_points(f))
        val += _tail(G, s, term.log_power, 1.0, f)
        total += term.coeff * val
    return complex(total)


# ---------------------------------------------------------------------------
# W-projection extension


@dataclass(frozen=True)
class WProjection:
    """``W f = f - sum_{|alpha| <= order} f^(alpha)(0) x^alpha w(x) / alpha!``."""

    order: int
    bump: Bump = Bump()

    def dual_function(self, alpha: int):
        return lambda x: np.asarray(x, dtype=float) ** alpha * self.bump(x) / math.factorial(alpha)

    def apply(self, f: TestFunction) -> TestFunction:
        d = f.derivatives(max(self.order, 0))

        def value(x):
            out = f(x)
            for k in range(self.order + 1):
                out = out - d[k] * self.dual_function(k)(x)
            return out

        def derivs(n):
            out = f.derivatives(n).copy()
            out[: min(n, self.order) + 1] = 0.0
            return out

        return TestFunction(value, derivs, f.scale, f.support, f.radial, f"W{f.label}")


def w_extend(t: ModelDistribution, f: TestFunction, W: WProjection | None = None) -> complex:
    """``<t, W f>``; with no subtraction needed this is the plain pairing."""
    order = t.extension_order()
    if order < 0:
        return pair(t, f)
    if W is None:
        W = WProjection(order)
    if W.order < order:
        raise ValueError(f"projection order {W.order} below the required {order}")
    rho = _series_radius(f, W.bump.inner)
    total = 0j
    for term in t.terms:
        G, taylor = _profile(term, t.dim, f)
        s = t.dim - term.a
        val = _remainder_integral(G, taylor, s, term.log_power, W.order, rho, W.bump.outer,
                                  cutoff=W.bump, points=_scale_points(f, [W.bump.inner]))
        val += _tail(G, s, term.log_power, W.bump.outer, f)
        total += term.coeff * val
    return complex(total)


def bump_constant(t: ModelDistribution, w: WProjection, w2: WProjection) -> np.ndarray:
    """Coefficients ``c_alpha = <t, (w2_alpha - w_alpha)>``; extensions differ by ``sum c_alpha f^(alpha)(0)``."""
    out = []
    for alpha in range(w.order + 1):
        diff = TestFunction(lambda x, a=alpha: w2.dual_function(a)(x) - w.dual_function(a)(x),
                            lambda n: np.zeros(n + 1), 1.0, max(w.bump.outer, w2.bump.outer))
        if t.dim > 1:
            diff.radial = True
        total = 0j
        for term in t.terms:
            G, _ = _profile(term, t.dim, diff)
            s = t.dim - term.a
            lo = min(w.bump.inner, w2.bump.inner)
            hi = max(w.bump.outer, w2.bump.outer)

            def integrand(r, G=G, s=s, term=term):
                return r ** (s - 1) * math.log(r) ** term.log_power * G(r)

            total += term.coeff * _quad(integrand, lo, hi, [w.bump.outer, w2.bump.outer,
                                                            w.bump.inner, w2.bump.inner])
        out.append(total)
    return np.array(out)


# ---------------------------------------------------------------------------
# analytic regularization


@dataclass(frozen=True)
class LaurentSeries:
    """``sum_k pp[k] zeta^{-k} + sum_m rp[m] zeta^m``."""

    pp: dict
    rp: tuple

    def __call__(self, zeta: complex) -> complex:
        val = sum(c * zeta ** (-k) for k, c in self.pp.items())
        return complex(val + sum(c * zeta**m for m, c in enumerate(self.rp)))

    @property
    def pole_order(self) -> int:
        return max((k for k, c in self.pp.items() if abs(c) > 0), default=0)

    def minimal_subtraction(self) -> "LaurentSeries":
        return LaurentSeries({}, self.rp)

    def finite_part(self) -> complex:
        return complex(self.rp[0]) if self.rp else 0j


def analytic_regularize(t: ModelDistribution, f: TestFunction, regular_terms: int = 3,
                        split: float = 1.0) -> LaurentSeries:
    """Laurent data of ``zeta -> <t^zeta, f>`` around 0, with ``a -> a - zeta``.

    Inside radius ``split`` the Taylor polynomial of the profile up to the
    extension order is subtracted; its moments give the closed-form terms
    ``(-1)^j j! / (zeta + s + k)^{j+1}`` scaled by ``split``-powers, whose
    ``s + k = 0`` members are the poles.
    """
    order = max(t.extension_order(), -1)
    pp: dict[int, complex] = {}
    rp = np.zeros(regular_terms, dtype=complex)
    L = math.log(split)
    for term in t.terms:
        G, taylor = _profile(term, t.dim, f)
        s = t.dim - term.a
        j = term.log_power
        g = taylor(max(order, 0))
        for k in range(order + 1):
            if g[k] == 0:
                continue
            s0 = s + k
            # int_0^split r^{zeta+s0-1} log^j r dr, expanded in zeta
            if abs(s0) < 1e-12:
                # split^zeta * sum_i (-1)^i j!/(j-i)! L^{j-i} / zeta^{i+1}
                for i in range(j + 1):
                    amp = (-1) ** i * math.perm(j, i) * L ** (j - i)
                    # split^zeta = sum_q (L zeta)^q / q!
                    for q in range(i + 1 + regular_terms):
                        power = q - (i + 1)
                        c = term.coeff * g[k] * amp * L**q / math.factorial(q)
                        if power < 0:
                            if -power > POLE_ORDER_CAP:
                                raise ValueError("pole order exceeds the cap")
                            pp[-power] = pp.get(-power, 0) + c
                        elif power < regular_terms:
                            rp[power] += c
            else:
                for m in range(regular_terms):
                    # d^m/dzeta^m of the moment at zeta = 0, over m!
                    rp[m] += term.coeff * g[k] * _moment_derivative(s0, j, m, split) / math.factorial(m)
        for m in range(regular_terms):
            scale = term.coeff / math.factorial(m)
            inner = _remainder_integral(G, taylor, s, j + m, order, _series_radius(f, split), split,
                                        points=_scale_points(f)) \
                if split > 0 else 0.0
            outer = _tail(G, s, j + m, split, f)
            rp[m] += scale * (inner + outer)
    return LaurentSeries({k: complex(v) for k, v in sorted(pp.items())}, tuple(complex(x) for x in rp))


def _moment_derivative(s0: float, j: int, m: int, rho: float) -> float:
    """``int_0^rho r^{s0-1} log^{j+m} r dr`` (the m-th zeta derivative of the moment)."""
    # for s0 < 0 this is the analytic continuation of the moment
    lr = math.log(rho)
    n = j + m
    total = 0.0
    for i in range(n + 1):
        total += (-1) ** i * math.perm(n, i) * lr ** (n - i) / s0 ** (i + 1)
    return rho**s0 * total


def regularized_pairing(t: ModelDistribution, f: TestFunction, zeta: float, split: float = 1.0) -> complex:
    """``<t^zeta, f>`` at a non-zero ``zeta`` by analytic continuation of the split integral."""
    order = max(t.extension_order(), -1)
    total = 0j
    for term in t.terms:
        G, taylor = _profile(term, t.dim, f)
        s = t.dim - term.a + zeta
        j = term.log_power
        g = taylor(max(order, 0))
        for k in range(order + 1):
            if g[k] != 0:
                total += term.coeff * g[k] * _moment_derivative(s + k, j, 0, split)
        inner = _remainder_integral(G, taylor, s, j, order, _series_radius(f, split), split,
                                    points=_scale_points(f))
        total += term.coeff * (inner + _tail(G, s, j, split, f))
    return complex(total)


def ms_extend(t: ModelDistribution, f: TestFunction) -> complex:
    """Minimal subtraction: the order-zero Laurent coefficient."""
    return analytic_regularize(t, f).finite_part()


@dataclass(frozen=True)
class AmbiguityFit:
    coefficients: np.ndarray
    residual: float
    orders: tuple


def ms_vs_w_ambiguity(t: ModelDistribution, tests, W: WProjection | None = None) -> AmbiguityFit:
    """Fit ``<ms - w_extend, f>`` against ``f^(alpha)(0)`` for ``alpha <= order``."""
    order = t.extension_order()
    if order < 0:
        return AmbiguityFit(np.zeros(0), 0.0, ())
    tests = list(tests)
    rows, rhs = [], []
    for f in tests:
        rows.append(f.derivatives(order))
        rhs.append(ms_extend(t, f) - w_extend(t, f, W))
    A = np.array(rows, dtype=complex)
    b = np.array(rhs)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.abs(A @ coef - b).max())
    return AmbiguityFit(coef, residual, tuple(range(order + 1)))


# ---------------------------------------------------------------------------
# scaling degree


@dataclass(frozen=True)
class ScalingEstimate:
    value: float
    width: float


def estimate_scaling_degree(pairing, lambdas) -> ScalingEstimate:
    """Least-squares ``-slope`` of ``log|pairing(lam)|`` against ``log lam``.

    ``pairing(lam)`` should return ``<t(lam x), f>``; the width is the
    standard error of the slope.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if len(lambdas) < 6:
        raise ValueError("need at least six scales")
    vals = np.array([abs(pairing(lam)) for lam in lambdas])
    if np.all(vals < 1e-300):
        raise ValueError("all pairings vanish; scaling fit is degenerate")
    x, y = np.log(lambdas), np.log(np.maximum(vals, 1e-300))
    res = np.polyfit(x, y, 1, full=False, cov=True)
    (slope, _), cov = res
    return ScalingEstimate(float(-slope), float(math.sqrt(max(cov[0, 0], 0.0))))


def scaled_pairing(extension, dim: int, f: TestFunction):
    """``lam -> <u(lam x), f> = lam^{-d} <u, f(x/lam)>`` for a pairing rule ``u``."""
    return lambda lam: lam ** (-dim) * extension(f.scaled(lam))


def mollified_delta_pairing(order: int, eta: float, f: TestFunction):
    """``lam -> <d^k delta_eta (lam x), f>`` in one dimension (Gaussian mollifier)."""

    def pairing(lam):
        # y = lam x turns the pairing into lam^{-1} int delta_eta^(k)(y) f(y / lam) dy
        def integrand(y):
            u = y / eta
            hk = special.eval_hermite(order, u)
            mollifier = (-1 / eta) ** order * hk * np.exp(-u * u) / (eta * math.sqrt(math.pi))
            return mollifier * f(y / lam)

        span = 12 * eta
        return _quad(integrand, -span, span, [0.0]) / lam

    return pairing
