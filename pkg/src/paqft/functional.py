"""Polynomial functionals on grid configurations and truncated series in hbar, lambda.

A functional is stored as a sum of *vertex terms*.  A term with vertex
multiplicities ``(n_1, ..., n_p)`` and coefficient tensor ``c`` of shape
``(N,) * p`` evaluates to::

    sum_x c[x_1, ..., x_p] * prod_a w[x_a] * phi[x_a] ** n_a

with ``w`` the quadrature weights.  A dense symmetric rank-k kernel is the
special case of k vertices of multiplicity one; a local density is a single
vertex.  Keys of the term table are the sorted multiplicity tuples, so terms
with equal keys add directly.
"""
from __future__ import annotations

import itertools
import math
import string
from dataclasses import dataclass
from numbers import Number

import numpy as np

from .model import ModelSpec

MAX_DEGREE = 12
_LETTERS = string.ascii_letters


def assemble(spec: ModelSpec, blocks, edges, kernel=None, powers=None):
    """Contract vertex blocks along edges and sum out exhausted vertices.

    Parameters
    ----------
    blocks : list of (multiplicities, coefficient tensor)
        Every vertex of every block gets its own index.
    edges : list of ((block, vertex), (block, vertex), power)
        Each edge multiplies by ``kernel[x, y] ** power`` and lowers both
        multiplicities by ``power``.
    kernel : array, optional
        Contraction kernel; required when ``edges`` is non-empty.
    powers : dict, optional
        Replacement matrices for ``kernel ** k`` keyed by ``k``.

    Returns
    -------
    (tuple, ndarray)
        Sorted remaining multiplicities and the matching tensor.
    """
    letters = iter(_LETTERS)
    names, mults, operands, subs = [], [], [], []
    offsets = []
    for mult, coeff in blocks:
        offsets.append(len(names))
        vs = [next(letters) for _ in mult]
        names.extend(vs)
        mults.extend(mult)
        operands.append(coeff)
        subs.append("".join(vs))
    mults = list(mults)
    lines = {}
    for (b1, v1), (b2, v2), k in edges:
        i, j = offsets[b1] + v1, offsets[b2] + v2
        mults[i] -= k
        mults[j] -= k
        if mults[i] < 0 or mults[j] < 0:
            raise ValueError("edge power exceeds vertex multiplicity")
        key = (i, j)
        lines[key] = lines.get(key, 0) + k
    for (i, j), k in lines.items():
        if k:
            operands.append(powers[k] if powers and k in powers else kernel**k)
            subs.append(names[i] + names[j])
    keep = []
    for i, n in enumerate(mults):
        if n == 0:
            operands.append(spec.weights)
            subs.append(names[i])
        else:
            keep.append(i)
    keep.sort(key=lambda i: mults[i])
    out = "".join(names[i] for i in keep)
    expr = ",".join(subs) + "->" + out
    if len(operands) == 1:
        value = np.einsum(expr, operands[0])
    else:
        value = np.einsum(expr, *operands, optimize="greedy")
    return tuple(mults[i] for i in keep), np.asarray(value, dtype=complex)


def _symmetrize_groups(mult: tuple, c: np.ndarray) -> np.ndarray:
    """Average over permutations of axes that carry equal multiplicities."""
    groups = [list(g) for _, g in itertools.groupby(range(len(mult)), key=lambda i: mult[i])]
    out = c
    for g in groups:
        if len(g) < 2:
            continue
        acc = np.zeros_like(out)
        perms = list(itertools.permutations(g))
        for perm in perms:
            axes = list(range(len(mult)))
            for src, dst in zip(g, perm):
                axes[src] = dst
            acc += np.transpose(out, axes)
        out = acc / len(perms)
    return out


class PolyFunctional:
    """Polynomial functional on grid configurations of a model."""

    __array_priority__ = 100

    def __init__(self, spec: ModelSpec, terms: dict | None = None):
        self.spec = spec
        self.terms: dict[tuple, np.ndarray] = {}
        for mult, c in (terms or {}).items():
            self._accumulate(tuple(mult), np.asarray(c, dtype=complex))

    def _accumulate(self, mult: tuple, c: np.ndarray):
        if any(n < 1 for n in mult):
            raise ValueError("vertex multiplicities must be positive")
        if sum(mult) > MAX_DEGREE:
            raise ValueError(f"degree {sum(mult)} exceeds cap {MAX_DEGREE}")
        order = sorted(range(len(mult)), key=lambda i: mult[i])
        if order != list(range(len(mult))):
            c = np.transpose(c, order)
            mult = tuple(mult[i] for i in order)
        if c.shape != (self.spec.size,) * len(mult):
            raise ValueError("coefficient tensor does not match the grid")
        if mult in self.terms:
            self.terms[mult] = self.terms[mult] + c
        else:
            self.terms[mult] = c

    # constructors -----------------------------------------------------
    @classmethod
    def zero(cls, spec):
        return cls(spec)

    @classmethod
    def constant(cls, spec, value):
        return cls(spec, {(): np.asarray(value, dtype=complex)})

    @classmethod
    def linear(cls, spec, f):
        """``F_f(phi) = int f phi``."""
        return cls(spec, {(1,): np.asarray(f)})

    @classmethod
    def local(cls, spec, densities: dict):
        """``sum_p int f_p phi^p`` for a map ``p -> f_p``."""
        out = cls(spec)
        for p, f in densities.items():
            f = np.broadcast_to(np.asarray(f, dtype=complex), (spec.size,))
            if p == 0:
                out._accumulate((), np.asarray(f @ spec.weights))
            else:
                out._accumulate((p,), f.copy())
        return out

    @classmethod
    def bilocal(cls, spec, kernel):
        """``int int K(x, y) phi(x) phi(y)``."""
        return cls(spec, {(1, 1): np.asarray(kernel)})

    @classmethod
    def from_kernel(cls, spec, kernel):
        """Functional ``<K, phi^{(x) k}>`` for a dense rank-k kernel."""
        kernel = np.asarray(kernel)
        return cls(spec, {(1,) * kernel.ndim: kernel})

    @classmethod
    def evaluation(cls, spec, index: int):
        """Evaluation functional ``phi -> phi[index]``."""
        f = np.zeros(spec.size)
        f[index] = 1.0 / spec.weights[index]
        return cls.linear(spec, f)

    # algebra ------------------------------------------------------------
    def copy(self):
        return PolyFunctional(self.spec, {k: v.copy() for k, v in self.terms.items()})

    def _check(self, other):
        if other.spec != self.spec:
            raise ValueError("functionals live on different grids")

    def __add__(self, other):
        if isinstance(other, Number):
            other = PolyFunctional.constant(self.spec, other)
        if not isinstance(other, PolyFunctional):
            return NotImplemented
        self._check(other)
        out = self.copy()
        for k, v in other.terms.items():
            out._accumulate(k, v)
        return out

    __radd__ = __add__

    def __neg__(self):
        return PolyFunctional(self.spec, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return PolyFunctional(self.spec, {k: other * v for k, v in self.terms.items()})
        if isinstance(other, PolyFunctional):
            return self.pointwise(other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Number):
            return self * (1.0 / other)
        return NotImplemented

    def pointwise(self, other: "PolyFunctional") -> "PolyFunctional":
        self._check(other)
        out = PolyFunctional(self.spec)
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                out._accumulate(*assemble(self.spec, [(ma, ca), (mb, cb)], []))
        return out

    def conj(self) -> "PolyFunctional":
        """Complex conjugate for real configurations."""
        return PolyFunctional(self.spec, {k: v.conj() for k, v in self.terms.items()})

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def constant_term(self) -> complex:
        c = self.terms.get(())
        return complex(c) if c is not None else 0j

    # evaluation ---------------------------------------------------------
    def __call__(self, phi) -> complex:
        return self.evaluate(phi)

    def evaluate(self, phi) -> complex:
        phi = self._config(phi)
        w = self.spec.weights
        total = 0j
        for mult, c in self.terms.items():
            vecs = [w * phi**n for n in mult]
            sub = _LETTERS[: len(mult)]
            if not mult:
                total += complex(c)
            else:
                expr = sub + "," + ",".join(sub) + "->"
                total += complex(np.einsum(expr, c, *vecs, optimize="greedy"))
        return total

    def _config(self, phi):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.spec.size,):
            raise ValueError("configuration does not match the grid")
        return phi

    def derivative_kernel(self, phi, n: int) -> np.ndarray:
        """Dense symmetric rank-``n`` kernel of the n-th functional derivative.

        Pairing uses one weight per index, so a derivative that lands twice on
        the same vertex produces the grid delta ``delta_ij / w_i``.
        """
        if n < 0:
            raise ValueError("derivative order must be non-negative")
        phi = self._config(phi)
        N, w = self.spec.size, self.spec.weights
        out = np.zeros((N,) * n, dtype=complex)
        for mult, c in self.terms.items():
            p = len(mult)
            for ks in itertools.product(*(range(min(m, n) + 1) for m in mult)):
                if sum(ks) != n:
                    continue
                operands, subs = [c], [_LETTERS[:p]]
                keep = []
                for a, (m, k) in enumerate(zip(mult, ks)):
                    factor = math.factorial(m) // math.factorial(m - k)
                    operands.append(factor * w ** (1 - k) * phi ** (m - k))
                    subs.append(_LETTERS[a])
                    if k:
                        keep.append(a)
                expr = ",".join(subs) + "->" + "".join(_LETTERS[a] for a in keep)
                reduced = np.einsum(expr, *operands, optimize="greedy")
                slots = [a for a in keep for _ in range(ks[a])]
                for perm in set(itertools.permutations(slots)):
                    idx = []
                    for a in perm:
                        pos = keep.index(a)
                        shape = [1] * len(keep)
                        shape[pos] = N
                        idx.append(np.arange(N).reshape(shape))
                    if n == 0:
                        out = out + reduced
                    else:
                        out[tuple(idx)] += reduced
        return out

    def directional_derivative(self, phi, h) -> complex:
        """``<F^(1)(phi), h>`` with weights."""
        k = self.derivative_kernel(phi, 1)
        return complex((k * self.spec.weights) @ np.asarray(h))

    # structure ------------------------------------------------------------
    def support_indices(self, tol: float = 0.0) -> np.ndarray:
        """Grid indices where some kernel is non-zero."""
        mask = np.zeros(self.spec.size, dtype=bool)
        for mult, c in self.terms.items():
            a = np.abs(c)
            for axis in range(len(mult)):
                other = tuple(i for i in range(len(mult)) if i != axis)
                marg = a.max(axis=other) if other else a
                mask |= marg > tol
        return np.flatnonzero(mask)

    def support(self, tol: float = 0.0) -> "Support | None":
        """Time interval (and mode set) outside which all kernels vanish."""
        idx = self.support_indices(tol)
        if idx.size == 0:
            return None
        times = self.spec.point_times[idx]
        modes = np.unique(self.spec.point_modes[idx])
        return Support(float(times.min()), float(times.max()), tuple(int(m) for m in modes))

    def shift(self, psi) -> "PolyFunctional":
        """The functional ``phi -> F(phi + psi)``."""
        psi = self._config(psi)
        w = self.spec.weights
        out = PolyFunctional(self.spec)
        for mult, c in self.terms.items():
            for js in itertools.product(*(range(m + 1) for m in mult)):
                operands, subs, keep = [c], [_LETTERS[: len(mult)]], []
                for a, (m, j) in enumerate(zip(mult, js)):
                    vec = math.comb(m, j) * psi ** (m - j)
                    if j == 0:
                        vec = vec * w
                    else:
                        keep.append(a)
                    operands.append(vec)
                    subs.append(_LETTERS[a])
                expr = ",".join(subs) + "->" + "".join(_LETTERS[a] for a in keep)
                val = np.einsum(expr, *operands, optimize="greedy")
                out._accumulate(tuple(js[a] for a in keep), np.asarray(val))
        return out

    def canonical(self) -> dict[tuple, np.ndarray]:
        """Unique representation: coefficients vanish on coincident vertices.

        Coincident vertex positions are merged into a single vertex carrying
        the summed multiplicity, and equal-multiplicity axes are symmetrized.
        Two functionals are equal as polynomials iff their canonical forms are.
        """
        w = self.spec.weights
        N = self.spec.size
        queue = [(list(m), c.copy()) for m, c in self.terms.items()]
        out: dict[tuple, np.ndarray] = {}
        while queue:
            mult, c = queue.pop()
            p = len(mult)
            for a, b in itertools.combinations(range(p), 2):
                diag = np.diagonal(c, axis1=a, axis2=b) * w
                rest = [mult[i] for i in range(p) if i not in (a, b)]
                queue.append((rest + [mult[a] + mult[b]], np.array(diag)))
                shape = [1] * p
                shape[a] = N
                ia = np.arange(N).reshape(shape)
                shape = [1] * p
                shape[b] = N
                ib = np.arange(N).reshape(shape)
                c = np.where(ia == ib, 0.0, c)
            order = sorted(range(p), key=lambda i: mult[i])
            c = np.transpose(c, order)
            key = tuple(mult[i] for i in order)
            c = _symmetrize_groups(key, c)
            out[key] = out[key] + c if key in out else c
        return out

    def distance(self, other: "PolyFunctional") -> float:
        """Max-norm of the canonical coefficients of ``self - other``."""
        diff = (self - other).canonical()
        return max((float(np.abs(v).max()) for v in diff.values() if v.size), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(float(np.abs(v).max(initial=0.0)) <= tol for v in self.terms.values())

    def __repr__(self):
        keys = ", ".join(str(k) for k in sorted(self.terms, key=lambda k: (sum(k), k)))
        return f"PolyFunctional(terms=[{keys}])"


@dataclass(frozen=True)
class Support:
    t_min: float
    t_max: float
    modes: tuple

    def precedes(self, other: "Support") -> bool:
        """True when this support lies strictly earlier than ``other``."""
        return self.t_max < other.t_min

    def hull(self, other: "Support") -> "Support":
        return Support(min(self.t_min, other.t_min), max(self.t_max, other.t_max),
                       tuple(sorted(set(self.modes) | set(other.modes))))


# ---------------------------------------------------------------------------
# Truncated series in hbar and lambda


def _is_zero(x) -> bool:
    if isinstance(x, PolyFunctional):
        return x.is_zero()
    return x == 0


class FormalSeries:
    """Truncated power series in ``hbar`` and ``lambda``.

    Coefficients are keyed by ``(j, k)`` for ``hbar**j * lambda**k``.  When
    ``lambda_weight`` is 1 each power of lambda may come with one inverse
    power of hbar; the hbar grade is then ``j + k``.  Terms are kept while the
    hbar grade is at most ``caps[0]`` and ``k <= caps[1]``.  Products of
    graded terms add grades, so truncation commutes with arithmetic.
    """

    def __init__(self, coeffs: dict | None = None, caps=(2, 2), lambda_weight: int = 0):
        self.caps = (int(caps[0]), int(caps[1]))
        self.lambda_weight = int(lambda_weight)
        self.coeffs: dict[tuple, object] = {}
        for key, v in (coeffs or {}).items():
            self._put(key, v)

    def grade(self, key) -> int:
        j, k = key
        return j + self.lambda_weight * k

    def _put(self, key, v):
        j, k = key
        if self.grade(key) < 0 or k < 0:
            raise ValueError(f"coefficient {key} has negative grade")
        if self.grade(key) > self.caps[0] or k > self.caps[1]:
            return
        if key in self.coeffs:
            v = self.coeffs[key] + v
        if _is_zero(v):
            self.coeffs.pop(key, None)
        else:
            self.coeffs[key] = v

    def _like(self, coeffs=None):
        return FormalSeries(coeffs, self.caps, self.lambda_weight)

    @classmethod
    def scalar(cls, value, caps=(2, 2), lambda_weight=0):
        return cls({(0, 0): value}, caps, lambda_weight)

    def __getitem__(self, key):
        return self.coeffs.get(key, 0)

    def get(self, key, default=0):
        return self.coeffs.get(key, default)

    def _compatible(self, other):
        if self.caps != other.caps or self.lambda_weight != other.lambda_weight:
            raise ValueError("series have different caps")

    def __add__(self, other):
        if not isinstance(other, FormalSeries):
            other = self._like({(0, 0): other})
        self._compatible(other)
        out = self._like(dict(self.coeffs))
        for k, v in other.coeffs.items():
            out._put(k, v)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self._like({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "FormalSeries":
        return self._like({k: c * v for k, v in self.coeffs.items()})

    def shift(self, dj: int, dk: int = 0) -> "FormalSeries":
        """Multiply by ``hbar**dj * lambda**dk``."""
        out = self._like()
        for (j, k), v in self.coeffs.items():
            if self.grade((j + dj, k + dk)) >= 0:
                out._put((j + dj, k + dk), v)
            else:
                raise ValueError("shift produces negative grade")
        return out

    def truncate(self, caps) -> "FormalSeries":
        out = FormalSeries(None, caps, self.lambda_weight)
        for k, v in self.coeffs.items():
            out._put(k, v)
        return out

    def multiply(self, other: "FormalSeries", product=None) -> "FormalSeries":
        """Cauchy product; ``product(a, b)`` may itself return a series in hbar."""
        self._compatible(other)
        out = self._like()
        for (j1, k1), a in self.coeffs.items():
            for (j2, k2), b in other.coeffs.items():
                k = k1 + k2
                if k > self.caps[1]:
                    continue
                if self.grade((j1 + j2, k)) > self.caps[0]:
                    continue
                val = a * b if product is None else product(a, b)
                if isinstance(val, FormalSeries):
                    for (j3, k3), v in val.coeffs.items():
                        out._put((j1 + j2 + j3, k + k3), v)
                else:
                    out._put((j1 + j2, k), val)
        return out

    def __mul__(self, other):
        if isinstance(other, FormalSeries):
            return self.multiply(other)
        return self.scale(other)

    __rmul__ = __mul__

    def _max_terms(self) -> int:
        return self.caps[0] + self.caps[1] + 1

    def exp(self, product=None, unit=1) -> "FormalSeries":
        if (0, 0) in self.coeffs:
            raise ValueError("exponential needs a vanishing constant coefficient")
        out = self._like({(0, 0): unit})
        term = self._like({(0, 0): unit})
        for n in range(1, self._max_terms() + 1):
            term = term.multiply(self, product).scale(1.0 / n)
            if not term.coeffs:
                break
            out = out + term
        return out

    def inverse(self, product=None, unit=1) -> "FormalSeries":
        """Neumann-series inverse; the constant coefficient must be a unit scalar."""
        c0 = self.coeffs.get((0, 0))
        if c0 is None:
            raise ValueError("series without constant coefficient is not invertible")
        if isinstance(c0, PolyFunctional):
            if any(k for k in c0.terms if k):
                raise ValueError("constant coefficient must be field independent")
            c0 = c0.constant_term()
        if c0 == 0:
            raise ValueError("series is not invertible")
        rest = self - self._like({(0, 0): self.coeffs[(0, 0)]})
        x = rest.scale(1.0 / c0)
        out = self._like({(0, 0): unit})
        term = self._like({(0, 0): unit})
        for _ in range(self._max_terms()):
            term = term.multiply(x, product).scale(-1.0)
            if not term.coeffs:
                break
            out = out + term
        return out.scale(1.0 / c0)

    def at_hbar(self, hbar: float) -> dict:
        """Sum over hbar powers at a numeric value; keys are lambda powers."""
        out: dict[int, object] = {}
        for (j, k), v in sorted(self.coeffs.items()):
            term = v * (hbar**j)
            out[k] = out[k] + term if k in out else term
        return out

    def map(self, fn) -> "FormalSeries":
        return self._like({k: fn(v) for k, v in self.coeffs.items()})

    def conj(self) -> "FormalSeries":
        return self.map(lambda v: v.conj() if hasattr(v, "conj") else np.conj(v))

    def max_abs(self) -> float:
        """Largest coefficient magnitude; functionals use canonical max-norm."""
        best = 0.0
        for v in self.coeffs.values():
            if isinstance(v, PolyFunctional):
                canon = v.canonical()
                best = max([best] + [float(np.abs(a).max()) for a in canon.values() if a.size])
            else:
                best = max(best, abs(v))
        return best

    def distance(self, other: "FormalSeries") -> float:
        """Max coefficient difference over the union of keys; caps may differ."""
        diff = FormalSeries(None, (10**6, 10**6), self.lambda_weight)
        for k, v in self.coeffs.items():
            diff._put(k, v)
        for k, v in other.coeffs.items():
            diff._put(k, -v)
        return diff.max_abs()

    def __repr__(self):
        return f"FormalSeries(keys={sorted(self.coeffs)}, caps={self.caps})"
