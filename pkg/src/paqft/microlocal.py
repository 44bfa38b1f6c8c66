"""Numerical wave-front directions, cone arithmetic and Hamiltonian flow of symbols.

Fourier transforms use ``u_hat(k) = int u(x) exp(+i k x) dx``.  A direction
is called rapid when the windowed transform falls off faster than a fixed
power of ``|k|`` over the upper half of the resolved band, or sits below
the floor there.  The floor is relative to the larger of the spectral peak
and the L1 norm of the samples; point samples of a singularity only two
grid steps wide alias at about ``exp(-3.5 pi) ~ 2e-5`` of the peak, so the
floor sits above that.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

RAPID_POWER = 4.0
FLOOR = 1e-4
MIN_WINDOW_SAMPLES = 8


@dataclass(frozen=True)
class SampledDistribution:
    x: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        if len(self.x) != len(self.values):
            raise ValueError("sample count mismatch")
        if len(self.x) % 2:
            raise ValueError("use an even number of samples")
        dx = np.diff(self.x)
        if not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")

    @property
    def spacing(self) -> float:
        return float(self.x[1] - self.x[0])


def uniform_grid(n: int = 4096, half_width: float = 4.0) -> np.ndarray:
    return np.linspace(-half_width, half_width, n, endpoint=False)


def mollified_delta(x, eta: float | None = None) -> SampledDistribution:
    """Gaussian approximation of the delta function; ``eta`` defaults to half a step."""
    x = np.asarray(x, dtype=float)
    h = x[1] - x[0]
    eta = h / 2 if eta is None else eta
    vals = np.exp(-0.5 * (x / eta) ** 2) / (eta * np.sqrt(2 * np.pi))
    return SampledDistribution(x, vals.astype(complex), "delta")


def regularized_inverse(x, eps: float) -> SampledDistribution:
    """``1 / (x + i eps)``."""
    x = np.asarray(x, dtype=float)
    return SampledDistribution(x, 1.0 / (x + 1j * eps), "inverse")


def smooth_gaussian(x, width: float = 0.5) -> SampledDistribution:
    x = np.asarray(x, dtype=float)
    return SampledDistribution(x, np.exp(-((x / width) ** 2)).astype(complex), "gaussian")


@dataclass(frozen=True)
class DirectionVerdict:
    slope: float
    rapid: bool
    below_floor: bool


@dataclass(frozen=True)
class ScanResult:
    x0: float
    plus: DirectionVerdict
    minus: DirectionVerdict

    @property
    def singular_directions(self) -> frozenset:
        out = set()
        if not self.plus.rapid:
            out.add(+1)
        if not self.minus.rapid:
            out.add(-1)
        return frozenset(out)


def windowed_transform(u: SampledDistribution, x0: float, width: float):
    """Wavenumbers and ``int u(x) w(x - x0) exp(i k x) dx`` with a Gaussian window."""
    x, h = u.x, u.spacing
    if width / h < MIN_WINDOW_SAMPLES / 2:
        raise ValueError("window spans fewer than 8 samples")
    if not (x[0] + 6 * width <= x0 <= x[-1] - 6 * width):
        raise ValueError("window leaves the grid")
    w = np.exp(-0.5 * ((x - x0) / width) ** 2)
    v = u.values * w
    n = len(x)
    k = 2 * np.pi * np.fft.fftfreq(n, d=h)
    # ifft carries exp(+2 pi i m j / n); restore the x[0] offset explicitly
    vhat = np.fft.ifft(v) * n * h * np.exp(1j * k * x[0])
    return k, vhat


def wf_scan(u: SampledDistribution, x0: float, width: float | None = None,
            rapid_power: float = RAPID_POWER, floor: float = FLOOR) -> ScanResult:
    """Classify the two covector directions at ``x0`` as rapid or singular."""
    h = u.spacing
    width = 20 * h if width is None else width
    k, vhat = windowed_transform(u, x0, width)
    mag = np.abs(vhat)
    scale = max(mag.max(), h * np.abs(u.values).sum())
    k_nyq = np.pi / h
    band_hi, band_lo = k_nyq / 4, k_nyq / 8
    verdicts = {}
    for sign in (+1, -1):
        sel = (sign * k >= band_lo) & (sign * k <= band_hi)
        kk, mm = np.abs(k[sel]), mag[sel]
        if scale == 0 or mm.max() <= floor * scale:
            verdicts[sign] = DirectionVerdict(-np.inf, True, True)
            continue
        slope = float(np.polyfit(np.log(kk), np.log(np.maximum(mm, 1e-300)), 1)[0])
        verdicts[sign] = DirectionVerdict(slope, slope < -rapid_power, False)
    return ScanResult(float(x0), verdicts[+1], verdicts[-1])


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeSet:
    """Direction cones per base point.

    One-dimensional cones are subsets of ``{+1, -1}``; two-dimensional ones
    are tuples of closed angular intervals ``(start, end)`` in radians.
    """

    directions: dict = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        for p, dirs in self.directions.items():
            if self.dim == 1 and not set(dirs) <= {+1, -1}:
                raise ValueError("one-dimensional directions are +1 or -1")
            if self.dim == 2:
                for a, b in dirs:
                    if b < a:
                        raise ValueError("angular interval must have start <= end")

    def at(self, point):
        return self.directions.get(point, frozenset() if self.dim == 1 else ())


def _intervals_meet(first, second) -> bool:
    """Do interval lists meet modulo 2 pi?"""
    two_pi = 2 * np.pi
    for (a, b), (c, d) in itertools.product(first, second):
        if b - a >= two_pi or d - c >= two_pi:
            return True
        for shift in (-two_pi, 0.0, two_pi):
            if max(a, c + shift) <= min(b, d + shift):
                return True
    return False


def product_ok(a: ConeSet, b: ConeSet, points) -> dict:
    """Per point: True unless some ``k`` in ``a`` has ``-k`` in ``b``."""
    if a.dim != b.dim:
        raise ValueError("cones of different dimension")
    out = {}
    for p in points:
        da, db = a.at(p), b.at(p)
        if a.dim == 1:
            out[p] = not any(-k in db for k in da)
        else:
            flipped = [(s + np.pi, e + np.pi) for s, e in db]
            out[p] = not _intervals_meet(list(da), flipped)
    return out


def cone_from_scan(results) -> ConeSet:
    return ConeSet({r.x0: frozenset(r.singular_directions) for r in results})


# ---------------------------------------------------------------------------
# bicharacteristic flow


@dataclass(frozen=True)
class PolynomialSymbol:
    """``sum c * x^alpha * k^beta`` in ``n`` position and ``n`` momentum variables.

    ``terms`` maps exponent tuples of length ``2n`` (positions first) to
    coefficients.
    """

    n: int
    terms: tuple

    def __post_init__(self):
        for exps, _ in self.terms:
            if len(exps) != 2 * self.n:
                raise ValueError("exponent tuple has the wrong length")
            if sum(exps) > 4:
                raise ValueError("symbols are limited to degree 4")

    @classmethod
    def from_dict(cls, n: int, table: dict):
        return cls(n, tuple(sorted(table.items())))

    def __call__(self, x, k) -> float:
        z = np.concatenate([np.atleast_1d(x), np.atleast_1d(k)])
        return float(sum(c * np.prod(z ** np.array(e)) for e, c in self.terms))

    def gradient(self, x, k):
        z = np.concatenate([np.atleast_1d(x), np.atleast_1d(k)]).astype(float)
        g = np.zeros(2 * self.n)
        for e, c in self.terms:
            e = np.array(e)
            for i in np.flatnonzero(e):
                ee = e.copy()
                ee[i] -= 1
                g[i] += c * e[i] * np.prod(z**ee)
        return g[: self.n], g[self.n:]


def wave_symbol() -> PolynomialSymbol:
    """``k_0^2 - k_1^2`` on two-dimensional spacetime."""
    return PolynomialSymbol.from_dict(2, {(0, 0, 2, 0): 1.0, (0, 0, 0, 2): -1.0})


def harmonic_symbol() -> PolynomialSymbol:
    """``k^2 + x^2``."""
    return PolynomialSymbol.from_dict(1, {(0, 2): 1.0, (2, 0): 1.0})


def anharmonic_symbol() -> PolynomialSymbol:
    """``k^2 / 2 + x^4 / 4``."""
    return PolynomialSymbol.from_dict(1, {(0, 2): 0.5, (4, 0): 0.25})


class FlowBlowUp(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"trajectory left finite values at step {step}")
        self.step = step


@dataclass(frozen=True)
class SymbolFlow:
    x: np.ndarray
    k: np.ndarray
    dt: float
    values: np.ndarray
    on_characteristic: bool

    @property
    def drift(self) -> float:
        return float(np.abs(self.values - self.values[0]).max())


def _rhs(symbol: PolynomialSymbol, x, k):
    gx, gk = symbol.gradient(x, k)
    return gk, -gx


def bicharacteristic_flow(symbol: PolynomialSymbol, x0, k0, steps: int, dt: float,
                          characteristic_tol: float = 1e-12) -> SymbolFlow:
    """RK4 integration of ``x' = d sigma/dk``, ``k' = -d sigma/dx``."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    k = np.atleast_1d(np.asarray(k0, dtype=float)).copy()
    xs = np.empty((steps + 1, symbol.n))
    ks = np.empty((steps + 1, symbol.n))
    vals = np.empty(steps + 1)
    xs[0], ks[0], vals[0] = x, k, symbol(x, k)
    # overflow is reported as FlowBlowUp below
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, steps + 1):
            a1, b1 = _rhs(symbol, x, k)
            a2, b2 = _rhs(symbol, x + 0.5 * dt * a1, k + 0.5 * dt * b1)
            a3, b3 = _rhs(symbol, x + 0.5 * dt * a2, k + 0.5 * dt * b2)
            a4, b4 = _rhs(symbol, x + dt * a3, k + dt * b3)
            x = x + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            k = k + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(k))):
                raise FlowBlowUp(i)
            xs[i], ks[i], vals[i] = x, k, symbol(x, k)
    return SymbolFlow(xs, ks, dt, vals, abs(vals[0]) <= characteristic_tol)


def convergence_order(errors, steps) -> float:
    """Least-squares slope of ``log error`` against ``log dt``."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
