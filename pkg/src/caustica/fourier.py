"""
Trigonometric polynomials and the omega-shift operator calculus.

A :class:`TrigPoly` stores the complex Fourier coefficients of a finite
Fourier series ``a(t) = sum_l c_l exp(i l t)`` in a dense, signed array.
Coefficients are either ``complex128`` or, for the extended precision
backend, ``object`` arrays of :class:`mpmath.mpc`.  Arithmetic never prunes
silently; pruning only happens in :meth:`TrigPoly.normalize`.

The shift, sum, difference and average operators are diagonal in the
Fourier basis.  Their multipliers ``exp(i l omega)`` are built from the
integer residue ``l p mod q`` so that resonant harmonics (``l`` in ``qZ``)
get the multiplier ``1`` exactly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import mpmath
import numpy as np

ZERO_TOL = 1e-9
ABS_FLOOR = 1e-13
MAX_DEGREE = 4096


class CausticaError(Exception):
    """Base class for all errors raised by the package."""


class IncompatibleEquationError(CausticaError):
    """A difference equation has a resonant right-hand side."""


class DegreeOverflowError(CausticaError):
    """A trigonometric polynomial exceeded the hard degree cap."""


class CorruptedInputError(CausticaError):
    """Coefficients that should be Hermitian are not."""


@dataclass(frozen=True)
class RotationNumber:
    """Reduced rotation number p/q in (0, 1/2) with q >= 3."""

    p: int
    q: int
    omega: float = field(init=False, repr=False)
    c: float = field(init=False, repr=False)
    s: float = field(init=False, repr=False)

    def __post_init__(self):
        p, q = int(self.p), int(self.q)
        if p <= 0 or q <= 0:
            raise ValueError(f"p and q must be positive, got {p}/{q}")
        if math.gcd(p, q) != 1:
            raise ValueError(f"{p}/{q} is not reduced")
        if q < 3 or 2 * p >= q:
            raise ValueError(f"need 0 < p/q < 1/2 and q >= 3, got {p}/{q}")
        omega = 2.0 * math.pi * p / q
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "c", math.cos(math.pi * p / q))
        object.__setattr__(self, "s", math.sin(math.pi * p / q))

    @property
    def rho(self) -> Fraction:
        return Fraction(self.p, self.q)

    def is_resonant(self, l: int) -> bool:
        return l % self.q == 0

    def constants(self, extended: bool = False):
        """Return ``(omega, c, s)`` as floats or as mpmath numbers."""
        if not extended:
            return self.omega, self.c, self.s
        half = mpmath.mpf(self.p) / self.q
        return 2 * mpmath.pi * half, mpmath.cospi(half), mpmath.sinpi(half)

    def unit_root(self, l: int, extended: bool = False):
        """``exp(i l omega)``, exactly 1 on resonant harmonics."""
        r = (l * self.p) % self.q
        if r == 0:
            return mpmath.mpc(1) if extended else 1.0 + 0.0j
        if 2 * r > self.q:
            r -= self.q
        if extended:
            return mpmath.expjpi(mpmath.mpf(2 * r) / self.q)
        x = 2.0 * math.pi * r / self.q
        return complex(math.cos(x), math.sin(x))

    def __str__(self):
        return f"{self.p}/{self.q}"


def _is_extended(arr: np.ndarray) -> bool:
    return arr.dtype == object


def _as_extended(arr: np.ndarray) -> np.ndarray:
    if _is_extended(arr):
        return arr
    out = np.empty(arr.shape, dtype=object)
    for i, v in enumerate(arr):
        out[i] = mpmath.mpc(v.real, v.imag)
    return out


def _as_float(arr: np.ndarray) -> np.ndarray:
    if not _is_extended(arr):
        return arr
    return np.array([complex(v) for v in arr], dtype=complex)


def _zeros(n: int, extended: bool) -> np.ndarray:
    if extended:
        out = np.empty(n, dtype=object)
        out[:] = [mpmath.mpc(0)] * n
        return out
    return np.zeros(n, dtype=complex)


class TrigPoly:
    """Finite Fourier series of a 2pi-periodic function.

    Parameters
    ----------
    coeffs : mapping or None
        Harmonic index ``l`` to complex amplitude.
    real : bool
        Marks Hermitian symmetry ``c_{-l} = conj(c_l)``; evaluation on the
        real line then returns real values.
    """

    __slots__ = ("_c", "_n", "real")

    def __init__(self, coeffs: Mapping[int, complex] | None = None, real: bool = True):
        coeffs = dict(coeffs or {})
        n = max((abs(int(l)) for l in coeffs), default=0)
        extended = any(isinstance(v, (mpmath.mpc, mpmath.mpf)) for v in coeffs.values())
        arr = _zeros(2 * n + 1, extended)
        for l, v in coeffs.items():
            arr[int(l) + n] += mpmath.mpc(v) if extended else complex(v)
        self._set(arr, real)

    def _set(self, arr: np.ndarray, real: bool):
        if len(arr) % 2 != 1:
            raise ValueError("coefficient array must have odd length")
        arr = _trim(arr)
        n = (len(arr) - 1) // 2
        if n > MAX_DEGREE:
            raise DegreeOverflowError(f"degree {n} exceeds cap {MAX_DEGREE}")
        arr.flags.writeable = False
        self._c = arr
        self._n = n
        self.real = bool(real)

    @classmethod
    def from_array(cls, arr, real: bool = True) -> "TrigPoly":
        """Build from a dense array indexed ``l = -N..N``."""
        obj = cls.__new__(cls)
        arr = np.asarray(arr)
        if arr.dtype != object:
            arr = arr.astype(complex)
        obj._set(arr.copy(), real)
        return obj

    @classmethod
    def constant(cls, value, real: bool = True) -> "TrigPoly":
        return cls({0: value}, real=real)

    @classmethod
    def cos(cls, l: int, amp: float = 1.0) -> "TrigPoly":
        if l == 0:
            return cls.constant(amp)
        return cls({l: amp / 2, -l: amp / 2})

    @classmethod
    def sin(cls, l: int, amp: float = 1.0) -> "TrigPoly":
        if l == 0:
            return cls()
        return cls({l: -0.5j * amp, -l: 0.5j * amp})

    @classmethod
    def exp(cls, l: int, amp: complex = 1.0) -> "TrigPoly":
        return cls({l: amp}, real=False)

    # -- inspection -------------------------------------------------------

    @property
    def array(self) -> np.ndarray:
        return self._c

    @property
    def nmax(self) -> int:
        """Storage half-width; an upper bound for the degree."""
        return self._n

    @property
    def extended(self) -> bool:
        return _is_extended(self._c)

    @property
    def coeffs(self) -> dict[int, complex]:
        n = self._n
        return {i - n: v for i, v in enumerate(self._c) if v != 0}

    def __getitem__(self, l: int):
        i = l + self._n
        if 0 <= i < len(self._c):
            return self._c[i]
        return mpmath.mpc(0) if self.extended else 0j

    def abs_array(self) -> np.ndarray:
        if self.extended:
            return np.array([float(abs(v)) for v in self._c])
        return np.abs(self._c)

    def max_abs(self) -> float:
        return float(self.abs_array().max()) if len(self._c) else 0.0

    def degree(self, tol: float = ZERO_TOL) -> int:
        """Largest ``|l|`` whose amplitude exceeds ``tol`` times the largest one."""
        mags = self.abs_array()
        top = mags.max()
        if top == 0:
            return 0
        idx = np.nonzero(mags > tol * top)[0]
        return int(np.abs(idx - self._n).max())

    def is_zero(self, tol: float = ZERO_TOL, floor: float = ABS_FLOOR, scale: float | None = None) -> bool:
        top = self.max_abs()
        ref = top if scale is None else scale
        return top <= max(tol * ref, floor)

    def __repr__(self):
        terms = ", ".join(f"{l}: {complex(v):.6g}" for l, v in sorted(self.coeffs.items()))
        return f"TrigPoly({{{terms}}}, real={self.real})"

    # -- conversions -------------------------------------------------------

    def to_extended(self) -> "TrigPoly":
        return TrigPoly.from_array(_as_extended(self._c), self.real)

    def to_float(self) -> "TrigPoly":
        return TrigPoly.from_array(_as_float(self._c), self.real)

    def padded(self, n: int) -> np.ndarray:
        """Coefficient array zero-padded to half-width ``n`` (writable copy)."""
        if n < self._n:
            raise ValueError("cannot pad to a smaller width")
        out = _zeros(2 * n + 1, self.extended)
        out[n - self._n:n + self._n + 1] = self._c
        return out

    # -- arithmetic ----------------------------------------------------------

    def _binary(self, other: "TrigPoly", sign: int) -> "TrigPoly":
        n = max(self._n, other._n)
        a = self.padded(n)
        b = other.padded(n)
        if _is_extended(a) != _is_extended(b):
            a, b = _as_extended(a), _as_extended(b)
        return TrigPoly.from_array(a + b if sign > 0 else a - b, self.real and other.real)

    def __add__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(other, real=not isinstance(other, complex))
        return self._binary(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, TrigPoly):
            other = TrigPoly.constant(other, real=not isinstance(other, complex))
        return self._binary(other, -1)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TrigPoly.from_array(-self._c, self.real)

    def __mul__(self, other):
        if isinstance(other, TrigPoly):
            return multiply(self, other)
        real = self.real and _is_real_scalar(other)
        return TrigPoly.from_array(self._c * other, real)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / other)

    def __pow__(self, k: int):
        out = TrigPoly.constant(1)
        for _ in range(k):
            out = out * self
        return out

    def derivative(self, order: int = 1) -> "TrigPoly":
        return derivative(self, order)

    def antiderivative(self, tol: float = ZERO_TOL, floor: float = ABS_FLOOR) -> "TrigPoly":
        """Zero-mean antiderivative; the mean of ``self`` must vanish."""
        mean = abs(self[0])
        if mean > max(tol * self.max_abs(), floor):
            raise IncompatibleEquationError(f"mean {complex(self[0]):.3g} prevents a periodic antiderivative")
        n = self._n
        ls = np.arange(-n, n + 1)
        out = self._c.copy()
        for i, l in enumerate(ls):
            out[i] = out[i] / (1j * l) if l else out[i] * 0
        return TrigPoly.from_array(out, self.real)

    def filter(self, keep) -> "TrigPoly":
        """Keep harmonics ``l`` with ``keep(l)`` true."""
        n = self._n
        out = self._c.copy()
        for i in range(len(out)):
            if not keep(i - n):
                out[i] = out[i] * 0
        return TrigPoly.from_array(out, self.real)

    def allclose(self, other: "TrigPoly", atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    # -- evaluation ----------------------------------------------------------

    def __call__(self, t):
        """Evaluate at real ``t`` (float path; vectorised)."""
        t = np.asarray(t, dtype=float)
        n = self._n
        c = _as_float(self._c)
        ls = np.arange(-n, n + 1)
        vals = np.exp(1j * np.multiply.outer(t, ls)) @ c
        return vals.real if self.real else vals

    # -- normalisation and I/O -------------------------------------------

    def normalize(self, tol: float = ZERO_TOL, floor: float = ABS_FLOOR) -> "TrigPoly":
        """Prune small entries and enforce Hermitian symmetry when ``real``.

        Entries with ``|a_l| <= max(tol * max|a|, floor)`` are dropped; with
        ``tol = 0`` only exact zeros go.  Asymmetry beyond
        ``10^3 * tol`` (relative, at least 1e-8) raises.
        """
        c = self._c.copy()
        top = self.max_abs()
        cut = max(tol * top, floor) if tol > 0 else 0.0
        for i, v in enumerate(c):
            if abs(v) <= cut:
                c[i] = v * 0
        top = max((float(abs(v)) for v in c), default=0.0)
        if self.real and top > 0:
            mirrored = np.conj(c[::-1]) if not self.extended else np.array([mpmath.conj(v) for v in c[::-1]], dtype=object)
            asym = float(max(abs(v) for v in (c - mirrored)))
            if asym > max(1e3 * tol, 1e-8) * top:
                raise CorruptedInputError(f"Hermitian asymmetry {asym:.3g} on a real polynomial")
            c = (c + mirrored) / 2
        return TrigPoly.from_array(c, self.real)

    def to_json_obj(self, clean: float = 0.0) -> dict:
        """``{"real", "coeffs": [[l, re, im], ...]}`` sorted by ``l``.

        With ``clean > 0`` real or imaginary parts below ``clean * max|a_l|``
        are written as zero and entries that vanish are dropped.
        """
        items = [(l, complex(v)) for l, v in sorted(self.coeffs.items())]
        cut = clean * self.max_abs()
        rows = []
        for l, v in items:
            re = v.real if abs(v.real) > cut else 0.0
            im = v.imag if abs(v.imag) > cut else 0.0
            if clean > 0 and re == 0.0 and im == 0.0:
                continue
            rows.append([int(l), float(re) + 0.0, float(im) + 0.0])
        return {"real": self.real, "coeffs": rows}

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "TrigPoly":
        if set(obj) - {"real", "coeffs"}:
            raise ValueError(f"unknown TrigPoly keys {sorted(set(obj) - {'real', 'coeffs'})}")
        return cls.from_triples(obj.get("coeffs", []), real=bool(obj.get("real", True)))

    @classmethod
    def from_triples(cls, triples: Iterable, real: bool = True) -> "TrigPoly":
        coeffs: dict[int, complex] = {}
        for item in triples:
            if not isinstance(item, (list, tuple)) or len(item) != 3:
                raise ValueError(f"harmonic entry must be [l, re, im], got {item!r}")
            l, re, im = item
            if isinstance(l, bool) or not isinstance(l, int):
                raise ValueError(f"harmonic index must be an integer, got {l!r}")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
                raise ValueError(f"amplitude parts must be numbers, got {item!r}")
            coeffs[l] = coeffs.get(l, 0j) + complex(re, im)
        poly = cls(coeffs, real=real)
        return poly.normalize(tol=0.0) if real else poly

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["l", "re", "im"])
        for l, re, im in self.to_json_obj()["coeffs"]:
            writer.writerow([l, repr(re), repr(im)])
        return buf.getvalue()


def _is_real_scalar(x) -> bool:
    if isinstance(x, (complex, np.complexfloating, mpmath.mpc)):
        return x.imag == 0
    return True


def _trim(arr: np.ndarray) -> np.ndarray:
    """Drop symmetric pairs of exactly-zero outer coefficients."""
    lo, hi = 0, len(arr) - 1
    while hi - lo >= 2 and arr[lo] == 0 and arr[hi] == 0:
        lo += 1
        hi -= 1
    return arr[lo:hi + 1]


def zero() -> TrigPoly:
    return TrigPoly()


def derivative(a: TrigPoly, order: int = 1) -> TrigPoly:
    """Coefficient map ``c_l -> (i l)^order c_l``."""
    if order == 0:
        return a
    n = a.nmax
    ls = np.arange(-n, n + 1)
    factor = (1j * ls) ** order
    if a.extended:
        factor = np.array([mpmath.mpc(0, int(l)) ** order for l in ls], dtype=object)
    return TrigPoly.from_array(a.array * factor, a.real)


def multiply(a: TrigPoly, b: TrigPoly) -> TrigPoly:
    """Full convolution; the degree of the product is at most the sum."""
    x, y = a.array, b.array
    if _is_extended(x) != _is_extended(y):
        x, y = _as_extended(x), _as_extended(y)
    return TrigPoly.from_array(np.convolve(x, y), a.real and b.real)


OPERATOR_KINDS = ("shift", "sum", "diff", "average", "resonant_projection")


def multipliers(n: int, rot: RotationNumber, kind: str, extended: bool = False) -> np.ndarray:
    """Diagonal symbol of an operator on harmonics ``-n..n``."""
    out = _zeros(2 * n + 1, extended)
    one = mpmath.mpc(1) if extended else 1.0
    for i, l in enumerate(range(-n, n + 1)):
        if kind == "shift":
            out[i] = rot.unit_root(l, extended)
        elif kind == "sum":
            out[i] = rot.unit_root(l, extended) + one
        elif kind == "diff":
            out[i] = rot.unit_root(l, extended) - one
        elif kind == "average":
            out[i] = one if l % rot.q == 0 else 0 * one
        elif kind == "resonant_projection":
            out[i] = one if (l % rot.q == 0 and l != 0) else 0 * one
        else:
            raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    return out


def apply_operator(a: TrigPoly, kind: str, rot: RotationNumber) -> TrigPoly:
    """Apply shift, sum, diff, average or resonant projection."""
    m = multipliers(a.nmax, rot, kind, a.extended)
    return TrigPoly.from_array(a.array * m, a.real)


def shift(a, rot):
    return apply_operator(a, "shift", rot)


def sigma(a, rot):
    return apply_operator(a, "sum", rot)


def delta(a, rot):
    return apply_operator(a, "diff", rot)


def mu(a, rot):
    return apply_operator(a, "average", rot)


def mu_star(a, rot):
    return apply_operator(a, "resonant_projection", rot)


def resonant_excess(b: TrigPoly, rot: RotationNumber, tol: float = ZERO_TOL,
                    floor: float = ABS_FLOOR, include_zero: bool = True) -> tuple[float, float]:
    """Largest resonant amplitude of ``b`` and the threshold it is judged against."""
    mags = b.abs_array()
    n = b.nmax
    res = 0.0
    for i, l in enumerate(range(-n, n + 1)):
        if l % rot.q == 0 and (include_zero or l != 0):
            res = max(res, float(mags[i]))
    top = float(mags.max()) if len(mags) else 0.0
    return res, max(tol * top, floor)


def invert_delta(b: TrigPoly, rot: RotationNumber, prescribed_average: TrigPoly | None = None,
                 tol: float = ZERO_TOL, floor: float = ABS_FLOOR) -> TrigPoly:
    """Solve ``delta{a} = b`` with ``mu{a} = prescribed_average``.

    Raises
    ------
    IncompatibleEquationError
        If ``b`` has resonant harmonics above tolerance.
    """
    res, thr = resonant_excess(b, rot, tol, floor)
    if res > thr:
        raise IncompatibleEquationError(
            f"resonant right-hand side (|b_qZ| = {res:.3g} > {thr:.3g}) for rotation {rot}")
    n = b.nmax
    m = multipliers(n, rot, "diff", b.extended)
    out = b.array.copy()
    for i, l in enumerate(range(-n, n + 1)):
        out[i] = out[i] * 0 if l % rot.q == 0 else out[i] / m[i]
    a = TrigPoly.from_array(out, b.real)
    if prescribed_average is not None:
        extra = prescribed_average.filter(lambda l: l % rot.q != 0)
        if not extra.is_zero(tol, floor):
            raise ValueError("prescribed average must contain only qZ harmonics")
        a = a + prescribed_average
    return a


def invert_delta_affine(b: TrigPoly, rot: RotationNumber, prescribed_average: TrigPoly | None = None,
                        tol: float = ZERO_TOL, floor: float = ABS_FLOOR) -> TrigPoly:
    """Solve ``delta{t + a(t)} = b`` for periodic ``a``; needs ``mu{b} = omega``."""
    omega = rot.constants(b.extended)[0]
    avg = mu(b, rot)
    gap = (avg - omega).max_abs()
    if gap > max(tol * max(b.max_abs(), float(omega)), floor):
        raise IncompatibleEquationError(f"mu{{b}} differs from omega by {gap:.3g}")
    return invert_delta(b - omega, rot, prescribed_average, tol, floor)


def evaluate_extended(a: TrigPoly, t) -> mpmath.mpf:
    """Evaluate at a single point in the current mpmath precision."""
    z = mpmath.expj(t)
    n = a.nmax
    c = a.array if a.extended else _as_extended(a.array)
    # Horner in z over l = -n..n, then rescale by z^-n
    acc = mpmath.mpc(0)
    for v in c[::-1]:
        acc = acc * z + v
    val = acc * mpmath.power(z, -n)
    return val.real if a.real else val
