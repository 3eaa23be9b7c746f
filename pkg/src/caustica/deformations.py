"""
Deformation specifications of the unit circle.

A deformation is given either directly through the per-order Fourier data
of its support function ``h(psi; eps) = 1 + sum_k eps^k h_k(psi)`` or as a
Cartesian curve ``x^2 + y^2 = 1 + eps P_1(x, y)``, whose support function is
expanded order by order from ``h^2 + h'^2 = 1 + eps P_1(x, y)``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .expansions import enumerate_multi_indices, multinomial_sum
from .fourier import ZERO_TOL, CausticaError, TrigPoly


class SpecError(CausticaError):
    """Malformed or unsupported deformation document."""


class SymmetryClass(str, enum.Enum):
    NONE = "none"
    CENTRALLY = "centrally"
    ANTI_CENTRALLY = "anti_centrally"


@dataclass(frozen=True)
class BivariatePoly:
    """Real polynomial ``sum p_ij x^i y^j``."""

    coeffs: tuple[tuple[tuple[int, int], float], ...]

    @classmethod
    def from_terms(cls, terms) -> "BivariatePoly":
        acc: dict[tuple[int, int], float] = {}
        for term in terms:
            if not isinstance(term, (list, tuple)) or len(term) != 3:
                raise SpecError(f"cartesian term must be [i, j, p_ij], got {term!r}")
            i, j, p = term
            if any(isinstance(v, bool) or not isinstance(v, int) or v < 0 for v in (i, j)):
                raise SpecError(f"exponents must be non-negative integers, got {term!r}")
            if isinstance(p, bool) or not isinstance(p, (int, float)):
                raise SpecError(f"coefficient must be a number, got {term!r}")
            acc[(i, j)] = acc.get((i, j), 0.0) + float(p)
        items = tuple(sorted((k, v) for k, v in acc.items() if v != 0.0))
        return cls(items)

    @property
    def terms(self) -> dict[tuple[int, int], float]:
        return dict(self.coeffs)

    @property
    def degree(self) -> int:
        return max((i + j for (i, j), _ in self.coeffs), default=0)

    def is_zero(self) -> bool:
        return not self.coeffs

    def parity(self) -> int | None:
        """``0`` if even, ``1`` if odd, ``None`` if mixed."""
        pars = {(i + j) % 2 for (i, j), _ in self.coeffs}
        return pars.pop() if len(pars) == 1 else None

    def __call__(self, x, y):
        return sum(p * x**i * y**j for (i, j), p in self.coeffs)

    def on_circle(self) -> TrigPoly:
        """``P(cos psi, sin psi)`` as a trigonometric polynomial."""
        cos, sin = TrigPoly.cos(1), TrigPoly.sin(1)
        out = TrigPoly()
        for (i, j), p in self.coeffs:
            out = out + p * (cos**i) * (sin**j)
        return out


@dataclass(frozen=True)
class DeformationSpec:
    """Per-order Fourier data or a Cartesian first-order polynomial."""

    kind: str
    h: tuple[TrigPoly, ...] = ()
    P1: BivariatePoly | None = None
    declared_degree: int | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("fourier", "cartesian"):
            raise SpecError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "cartesian" and self.P1 is None:
            raise SpecError("cartesian deformation needs P1")
        if self.kind == "fourier" and self.declared_degree is not None:
            if not degree_check(list(self.h), self.declared_degree):
                raise SpecError(f"support orders exceed declared degree n = {self.declared_degree}")

    @classmethod
    def fourier(cls, h, degree: int | None = None) -> "DeformationSpec":
        return cls("fourier", h=tuple(h), declared_degree=degree)

    @classmethod
    def cartesian(cls, P1: BivariatePoly | list, degree: int | None = None) -> "DeformationSpec":
        if not isinstance(P1, BivariatePoly):
            P1 = BivariatePoly.from_terms(P1)
        return cls("cartesian", P1=P1, declared_degree=degree)

    @property
    def degree(self) -> int | None:
        if self.declared_degree is not None:
            return self.declared_degree
        if self.kind == "cartesian":
            return self.P1.degree
        return None

    def orders(self, K: int) -> list[TrigPoly]:
        """``h_1..h_K`` (zero-padded for Fourier data)."""
        if self.kind == "fourier":
            h = list(self.h[:K])
            return h + [TrigPoly() for _ in range(K - len(h))]
        cached = self._cache.get("h")
        if cached is None or len(cached) < K:
            cached = support_from_cartesian(self.P1, K)
            self._cache["h"] = cached
        return list(cached[:K])

    def to_json_obj(self) -> dict:
        if self.kind == "fourier":
            body = {"h": [[list(t) for t in a.to_float().normalize(tol=0.0).to_json_obj(clean=1e-14)["coeffs"]] for a in self.h]}
            if self.declared_degree is not None:
                body["degree"] = self.declared_degree
            return {"fourier": body}
        body = {"terms": [[i, j, p] for (i, j), p in self.P1.coeffs]}
        if self.declared_degree is not None:
            body["degree"] = self.declared_degree
        return {"cartesian": body}


def _pair_sum(seq, k: int, skip_linear: bool) -> TrigPoly:
    # 2 * sum_{|alpha|=2, ||alpha||=k} seq^alpha / alpha!, optionally without alpha_0 = alpha_k = 1
    total = TrigPoly()
    for alpha in enumerate_multi_indices(2, k, start=0):
        entries = alpha.as_dict()
        if skip_linear and entries == {0: 1, k: 1}:
            continue
        total = total + alpha.monomial(seq) * (2.0 / alpha.factorial)
    return total


def support_from_cartesian(P1: BivariatePoly, max_order: int) -> list[TrigPoly]:
    """Support-function orders ``h_1..h_K`` of ``x^2 + y^2 = 1 + eps P_1(x, y)``.

    Solves ``2 h_k + G*_k + G._k = G<>_{k-1}`` order by order, where the
    three terms are the order-``k`` parts of ``h^2`` (without ``2 h_k``),
    ``h'^2`` and the order-``k-1`` part of ``P_1(x, y)`` on the curve.
    """
    if P1.is_zero():
        return [TrigPoly() for _ in range(max_order)]
    cos, sin = TrigPoly.cos(1), TrigPoly.sin(1)
    h = [TrigPoly.constant(1)]
    dh = [TrigPoly()]
    xs = [cos]
    ys = [sin]
    xcache: dict = {}
    ycache: dict = {}
    terms = P1.terms
    for k in range(1, max_order + 1):
        w = k - 1
        g_diamond = TrigPoly()
        for (i, j), p in terms.items():
            acc = TrigPoly()
            for w1 in range(0, w + 1):
                X = multinomial_sum(xs, i, w1, xcache, start=0)
                Y = multinomial_sum(ys, j, w - w1, ycache, start=0)
                acc = acc + X * Y
            g_diamond = g_diamond + acc * (p * math.factorial(i) * math.factorial(j))
        g_star = _pair_sum(h + [TrigPoly()], k, skip_linear=True)
        g_bullet = _pair_sum(dh + [TrigPoly()], k, skip_linear=True)
        hk = (g_diamond - g_star - g_bullet) * 0.5
        dhk = hk.derivative()
        h.append(hk)
        dh.append(dhk)
        xs.append(cos * hk - sin * dhk)
        ys.append(sin * hk + cos * dhk)
    return h[1:]


def _parities(a: TrigPoly, ref: float, tol: float) -> set[int]:
    return {l % 2 for l, v in a.coeffs.items() if abs(v) > max(tol * ref, 1e-300)}


def detect_symmetry(spec: DeformationSpec, max_order: int = 6, q: int | None = None,
                    tol: float = ZERO_TOL) -> SymmetryClass:
    """Classify by harmonic parity per order; Cartesian data use the parity of ``P_1``.

    When both symmetric classes fit (e.g. the zero deformation) the one
    with the larger exponent for ``q`` wins; without ``q`` it is central.
    """
    if spec.kind == "cartesian":
        par = spec.P1.parity()
        central = par in (0, None) and (par == 0 or spec.P1.is_zero())
        anti = par == 1 or spec.P1.is_zero()
    else:
        h = spec.orders(max_order)
        ref = max((a.max_abs() for a in h), default=0.0)
        central = all(_parities(a, ref, tol) <= {0} for a in h)
        anti = all(_parities(a, ref, tol) <= {k % 2} for k, a in enumerate(h, start=1))
    if central and anti:
        if q is None:
            return SymmetryClass.CENTRALLY
        n = spec.degree or 1
        c_chi = chi_exponent(SymmetryClass.CENTRALLY, n, q)
        a_chi = chi_exponent(SymmetryClass.ANTI_CENTRALLY, n, q)
        return SymmetryClass.ANTI_CENTRALLY if a_chi > c_chi else SymmetryClass.CENTRALLY
    if central:
        return SymmetryClass.CENTRALLY
    if anti:
        return SymmetryClass.ANTI_CENTRALLY
    return SymmetryClass.NONE


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def chi_exponent(sym: SymmetryClass | str, n: int, q: int) -> int:
    """Exponent ``chi``; the resonant caustic persists to order ``chi - 1``."""
    sym = SymmetryClass(sym)
    if n < 1 or q < 3:
        raise ValueError(f"need n >= 1 and q >= 3, got n={n}, q={q}")
    if sym is SymmetryClass.ANTI_CENTRALLY:
        if q % 2:
            return 1 + 2 * _ceil_div(q - n, 2 * n)
        return 2 * _ceil_div(q, 2 * n)
    if sym is SymmetryClass.CENTRALLY and q % 2:
        return _ceil_div(2 * q, n)
    return _ceil_div(q, n)


def degree_check(h_orders, n: int, tol: float = ZERO_TOL) -> bool:
    """True iff ``deg h_k <= n k`` for every supplied order."""
    ref = max((a.max_abs() for a in h_orders), default=0.0)
    for k, a in enumerate(h_orders, start=1):
        mags = a.abs_array()
        m = a.nmax
        for i, v in enumerate(mags):
            if v > max(tol * ref, 1e-300) and abs(i - m) > n * k:
                return False
    return True


_REJECTED = {
    "polar": "polar-coordinate deformations are not supported; give Fourier support data or a Cartesian P_1",
}


def _parse_deformation(obj: Mapping) -> DeformationSpec:
    if not isinstance(obj, Mapping):
        raise SpecError("deformation must be an object")
    for key, why in _REJECTED.items():
        if key in obj:
            raise SpecError(why)
    keys = set(obj)
    if len(keys) != 1 or not keys <= {"fourier", "cartesian"}:
        raise SpecError(f"deformation needs exactly one of 'fourier' or 'cartesian', got {sorted(keys)}")
    if "fourier" in obj:
        body = obj["fourier"]
        if not isinstance(body, Mapping) or set(body) - {"h", "degree"} or "h" not in body:
            raise SpecError("fourier deformation takes keys 'h' (required) and 'degree'")
        orders = body["h"]
        if not isinstance(orders, list):
            raise SpecError("'h' must be a list of per-order harmonic lists")
        try:
            h = [TrigPoly.from_triples(order) for order in orders]
        except (ValueError, CausticaError) as exc:
            raise SpecError(f"bad harmonic data: {exc}") from exc
        return DeformationSpec.fourier(h, _degree(body))
    body = obj["cartesian"]
    if isinstance(body, Mapping) and ({"orders", "P"} & set(body)):
        raise SpecError("only P = 1 + eps P_1 is supported; higher-order P_k terms are rejected")
    if not isinstance(body, Mapping) or set(body) - {"terms", "degree"} or "terms" not in body:
        raise SpecError("cartesian deformation takes keys 'terms' (required) and 'degree'")
    if not isinstance(body["terms"], list):
        raise SpecError("'terms' must be a list of [i, j, p_ij]")
    P1 = BivariatePoly.from_terms(body["terms"])
    n = _degree(body)
    if n is not None and P1.degree > n:
        raise SpecError(f"P_1 has degree {P1.degree} > declared degree {n}")
    return DeformationSpec.cartesian(P1, n)


def _degree(body) -> int | None:
    n = body.get("degree")
    if n is None:
        return None
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SpecError(f"degree must be a positive integer, got {n!r}")
    return n


def load_spec(source, max_order: int | None = None) -> DeformationSpec:
    """Load a deformation from a path, a JSON string, a full config or a bare deformation object.

    Cartesian specs are expanded eagerly when ``max_order`` is given.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        try:
            source = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from exc
    if isinstance(source, Mapping) and "deformation" in source:
        source = source["deformation"]
    spec = _parse_deformation(source)
    if max_order is not None:
        spec.orders(max_order)
    return spec


def random_cartesian(rng: np.random.Generator, n: int, symmetry: SymmetryClass | str = "none",
                     scale: float = 1.0) -> BivariatePoly:
    """Random ``P_1`` of degree exactly ``n`` with the requested parity."""
    symmetry = SymmetryClass(symmetry)
    if symmetry is SymmetryClass.CENTRALLY and n % 2:
        raise ValueError("a centrally symmetric P_1 has even degree")
    if symmetry is SymmetryClass.ANTI_CENTRALLY and n % 2 == 0:
        raise ValueError("an anti-centrally symmetric P_1 has odd degree")
    terms = []
    for d in range(0, n + 1):
        if symmetry is SymmetryClass.CENTRALLY and d % 2:
            continue
        if symmetry is SymmetryClass.ANTI_CENTRALLY and d % 2 == 0:
            continue
        for i in range(d + 1):
            terms.append([i, d - i, float(rng.normal()) * scale])
    if symmetry is SymmetryClass.NONE and n >= 1:
        # guarantee mixed parity
        terms.append([0, 0, 0.5 * scale])
        terms.append([1, 0, 0.5 * scale])
    terms.append([n, 0, scale])
    return BivariatePoly.from_terms(terms)


def random_trig(rng: np.random.Generator, degree: int, parity: int | None = None,
                exclude=(), scale: float = 1.0) -> TrigPoly:
    """Random real trigonometric polynomial of at most ``degree``."""
    coeffs: dict[int, complex] = {}
    for l in range(0, degree + 1):
        if parity is not None and l % 2 != parity:
            continue
        if l in exclude or -l in exclude:
            continue
        if l == 0:
            coeffs[0] = complex(rng.normal() * scale)
            continue
        v = complex(rng.normal(), rng.normal()) * scale / 2
        coeffs[l] = v
        coeffs[-l] = v.conjugate()
    return TrigPoly(coeffs)


def random_fourier(rng: np.random.Generator, n: int, K: int,
                   symmetry: SymmetryClass | str = "none", scale: float = 0.3) -> DeformationSpec:
    """Random polynomial deformation with ``h_k`` in ``T_{nk}`` and the requested symmetry."""
    symmetry = SymmetryClass(symmetry)
    h = []
    for k in range(1, K + 1):
        if symmetry is SymmetryClass.CENTRALLY:
            parity = 0
        elif symmetry is SymmetryClass.ANTI_CENTRALLY:
            parity = k % 2
        else:
            parity = None
        h.append(random_trig(rng, n * k, parity, scale=scale))
    return DeformationSpec.fourier(h, degree=n)
