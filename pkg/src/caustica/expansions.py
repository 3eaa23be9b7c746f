"""
Order-by-order coefficients of sin(theta), cos(theta), h(psi) and h'(psi).

Every quantity is an asymptotic series in the perturbative parameter whose
coefficients are trigonometric polynomials in the dynamical parameter ``t``.
The zeroth-order side and normal functions ``t - omega/2`` and ``t`` are
affine and never stored; composition ``f(psi(t))`` is expanded around
``psi = t`` so all stored data are periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from .fourier import RotationNumber, TrigPoly


@dataclass(frozen=True)
class MultiIndex:
    """Sparse multi-index ``alpha`` as sorted ``(l, alpha_l)`` pairs."""

    entries: tuple[tuple[int, int], ...]

    @property
    def order(self) -> int:
        return sum(a for _, a in self.entries)

    @property
    def weight(self) -> int:
        return sum(l * a for l, a in self.entries)

    @property
    def factorial(self) -> int:
        return math.prod(math.factorial(a) for _, a in self.entries)

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def monomial(self, seq, power_cache: dict | None = None) -> TrigPoly:
        """Product ``prod_l seq[l] ** alpha_l``."""
        out = None
        for l, a in self.entries:
            key = (l, a)
            if power_cache is not None and key in power_cache:
                term = power_cache[key]
            else:
                term = seq[l] ** a
                if power_cache is not None:
                    power_cache[key] = term
            out = term if out is None else out * term
        return TrigPoly.constant(1) if out is None else out


@lru_cache(maxsize=None)
def _partitions(weight: int, parts: int, smallest: int) -> tuple[tuple[int, ...], ...]:
    # non-decreasing tuples of exactly `parts` integers >= smallest summing to weight
    if parts == 0:
        return ((),) if weight == 0 else ()
    out = []
    for first in range(smallest, weight // parts + 1):
        for rest in _partitions(weight - first, parts - 1, first):
            out.append((first,) + rest)
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_multi_indices(order: int, weight: int, start: int = 1) -> tuple[MultiIndex, ...]:
    """All ``alpha`` supported on ``l >= start`` with ``|alpha| = order`` and ``||alpha|| = weight``.

    Results come in lexicographic order of the sorted part lists.
    """
    if order < 0 or weight < 0:
        raise ValueError("order and weight must be non-negative")
    if start not in (0, 1):
        raise ValueError("start index must be 0 or 1")
    out = []
    # with start=0 the zero entries absorb the remaining order
    min_positive = order if start == 1 else 0
    for positive in range(min_positive, order + 1):
        for parts in _partitions(weight, positive, 1):
            counts: dict[int, int] = {}
            if positive < order:
                counts[0] = order - positive
            for l in parts:
                counts[l] = counts.get(l, 0) + 1
            out.append(MultiIndex(tuple(sorted(counts.items()))))
    out.sort(key=lambda a: a.entries)
    return tuple(out)


def multinomial_sum(seq, order: int, weight: int, cache: dict | None = None,
                    start: int = 1) -> TrigPoly:
    """``sum_{|alpha|=order, ||alpha||=weight} seq^alpha / alpha!``.

    This is the weight-``weight`` coefficient of ``(sum_l eps^l seq[l])^order / order!``.
    """
    key = ("msum", start, order, weight)
    if cache is not None and key in cache:
        return cache[key]
    powers = cache.setdefault(("powers", start), {}) if cache is not None else None
    total = TrigPoly()
    for alpha in enumerate_multi_indices(order, weight, start):
        total = total + alpha.monomial(seq, powers) * (1.0 / alpha.factorial)
    if cache is not None:
        cache[key] = total
    return total


@dataclass
class ExpansionState:
    """All per-order coefficient functions computed so far.

    Lists are indexed by perturbative order.  ``theta[0]``, ``S[0]``, ``C[0]``,
    ``H[0]`` and ``Hp[0]`` hold the constant unperturbed values; ``phi[0]``
    and ``psi[0]`` are ``None`` because their affine parts live outside the
    trigonometric-polynomial algebra.
    """

    rot: RotationNumber
    h: list[TrigPoly]
    extended: bool = False
    order: int = 0
    dh: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    phi: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    S: list = field(default_factory=list)
    C: list = field(default_factory=list)
    H: list = field(default_factory=list)
    Hp: list = field(default_factory=list)
    Q: list = field(default_factory=list)
    Rt: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        omega, c, s = self.rot.constants(self.extended)
        conv = (lambda a: a.to_extended()) if self.extended else (lambda a: a.to_float())
        self.h = [TrigPoly.constant(1)] + [conv(a) for a in self.h]
        if self.extended:
            self.h[0] = self.h[0].to_extended()
        self.dh = [a.derivative() for a in self.h]
        const = (lambda v: TrigPoly.constant(v).to_extended()) if self.extended else TrigPoly.constant
        self.theta = [const(omega / 2)]
        self.phi = [None]
        self.psi = [None]
        self.S = [const(s)]
        self.C = [const(c)]
        self.H = [const(1)]
        self.Hp = [const(0)]
        self.Q = [const(0)]
        self.Rt = [const(c)]
        self.zeta = [const(0)]

    @property
    def constants(self):
        return self.rot.constants(self.extended)

    def h_order(self, k: int) -> TrigPoly:
        """``h_k``, zero beyond the supplied orders."""
        return self.h[k] if k < len(self.h) else TrigPoly()

    def dh_order(self, k: int) -> TrigPoly:
        return self.dh[k] if k < len(self.dh) else TrigPoly()

    def set_h(self, k: int, value: TrigPoly):
        """Replace ``h_k`` (used by the correction step) and drop stale caches."""
        value = value.to_extended() if self.extended else value.to_float()
        while len(self.h) <= k:
            self.h.append(TrigPoly())
            self.dh.append(TrigPoly())
        self.h[k] = value
        self.dh[k] = value.derivative()
        for key in [key for key in self.cache if key[0] == "deriv" and key[1] in ("h", "dh") and key[2] == k]:
            del self.cache[key]

    def derivative_of(self, name: str, i: int, j: int) -> TrigPoly:
        key = ("deriv", name, i, j)
        if key not in self.cache:
            base = self.h_order(i) if name == "h" else self.dh_order(i)
            self.cache[key] = base.derivative(j)
        return self.cache[key]

    def check_relations(self, k: int, tol: float = 1e-10) -> dict[str, float]:
        """Residuals of ``mu theta_k = 0``, ``mu phi_k = 0``, ``delta phi_k = 2 theta_k``, ``psi_k = phi_k + theta_k``."""
        from .fourier import delta, mu
        rot = self.rot
        return {
            "mu_theta": mu(self.theta[k], rot).max_abs(),
            "mu_phi": mu(self.phi[k], rot).max_abs(),
            "delta_phi": (delta(self.phi[k], rot) - 2 * self.theta[k]).max_abs(),
            "psi_sum": (self.psi[k] - self.phi[k] - self.theta[k]).max_abs(),
        }


def _require(state: ExpansionState, name: str, upto: int):
    seq = getattr(state, name)
    if len(seq) <= upto:
        raise ValueError(f"order {upto} of {name} is not available yet (have {len(seq) - 1})")


def sincos_coeffs(state: ExpansionState, k: int) -> tuple[TrigPoly, TrigPoly]:
    """``S_k`` and ``C_k`` from the derivative identities for sin and cos."""
    _require(state, "theta", k)
    _, c, s = state.constants
    St, Ct = sincos_tilde(state, k)
    return c * state.theta[k] + St, -s * state.theta[k] + Ct


def sincos_tilde(state: ExpansionState, k: int) -> tuple[TrigPoly, TrigPoly]:
    """The parts of ``S_k`` and ``C_k`` that only involve ``theta_{<k}``."""
    _require(state, "theta", k - 1)
    _require(state, "S", k - 1)
    St, Ct = TrigPoly(), TrigPoly()
    for l in range(1, k):
        St = St + (l * state.theta[l]) * state.C[k - l]
        Ct = Ct - (l * state.theta[l]) * state.S[k - l]
    return St * (1.0 / k), Ct * (1.0 / k)


def compose_coeffs(f_orders, psi_orders, k: int, cache: dict | None = None,
                   derivative=None) -> TrigPoly:
    """Order-``k`` coefficient of ``f(psi(t; eps); eps)`` with ``f_0`` constant.

    Parameters
    ----------
    f_orders : sequence of TrigPoly
        ``f_0, f_1, ...``; only ``f_1..f_k`` are used.
    psi_orders : sequence of TrigPoly
        ``psi_0 (ignored), psi_1, ..., psi_{k-1}``.
    cache : dict, optional
        Memo for multinomial sums shared across calls.
    derivative : callable, optional
        ``derivative(i, j)`` returning ``f_i^{(j)}``; defaults to direct
        differentiation.
    """
    fk = f_orders[k] if k < len(f_orders) else TrigPoly()
    return fk + compose_tilde(f_orders, psi_orders, k, cache, derivative)


def compose_tilde(f_orders, psi_orders, k: int, cache: dict | None = None,
                  derivative=None) -> TrigPoly:
    if k > 1 and len(psi_orders) < k:
        raise ValueError(f"psi up to order {k - 1} needed")
    if derivative is None:
        def derivative(i, j):
            fi = f_orders[i] if i < len(f_orders) else TrigPoly()
            return fi.derivative(j)
    total = TrigPoly()
    for i in range(1, k):
        if i >= len(f_orders):
            continue
        for j in range(1, k - i + 1):
            weight_sum = multinomial_sum(psi_orders, j, k - i, cache)
            total = total + weight_sum * derivative(i, j)
    return total


def qr_coeffs(state: ExpansionState, k: int) -> tuple[TrigPoly, TrigPoly]:
    """``Q_k`` and ``Rt_k`` for the pair ``h'(psi) sin(theta)``, ``h(psi) cos(theta)``.

    Side effect: fills ``state.H[k]`` and ``state.Hp[k]`` (they only need
    ``psi_{<k}``).
    """
    _require(state, "psi", k - 1)
    _require(state, "S", k - 1)
    _, c, s = state.constants
    cache = state.cache
    Htil = compose_tilde(state.h, state.psi, k, cache, lambda i, j: state.derivative_of("h", i, j))
    Hptil = compose_tilde(state.dh, state.psi, k, cache, lambda i, j: state.derivative_of("dh", i, j))
    Hk = state.h_order(k) + Htil
    Hpk = state.dh_order(k) + Hptil
    if len(state.H) == k:
        state.H.append(Hk)
        state.Hp.append(Hpk)
    else:
        state.H[k] = Hk
        state.Hp[k] = Hpk
    St, Ct = sincos_tilde(state, k)
    Qt = s * Hptil
    Rt = c * Hk + Ct
    for l in range(1, k):
        Qt = Qt + state.Hp[l] * state.S[k - l]
        Rt = Rt + state.H[l] * state.C[k - l]
    Q = s * state.dh_order(k) + Qt
    return Q, Rt
