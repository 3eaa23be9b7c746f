"""
Iterative persistence test for resonant caustics of deformed circles.

At order ``k`` the averaged obstruction ``mu{Q_k}`` decides whether the
caustic survives.  If it vanishes, the order-``k`` incidence-reflection,
side and normal coefficients are obtained by inverting the difference
operator; otherwise the Melnikov potential and the correction of the
support function at that order are returned.
"""

from __future__ import annotations

import math
from contextlib import nullcontext
from dataclasses import dataclass, field

import mpmath

from .deformations import DeformationSpec
from .expansions import ExpansionState, qr_coeffs, sincos_coeffs
from .fourier import (ABS_FLOOR, ZERO_TOL, CausticaError, RotationNumber, TrigPoly,
                      delta, invert_delta, mu, mu_star, resonant_excess, sigma)

OBSTRUCTION_TOL = 1e-8
DEFAULT_MAX_ORDER = 12
HARD_MAX_ORDER = 32
OUTPUT_CLEAN = 1e-14  # relative cut for rounding noise in written reports


class InconsistencyError(CausticaError):
    """An identity guaranteed by the theory failed numerically."""


class PreconditionError(CausticaError):
    """An operation was called on a state that does not satisfy its precondition."""


class ResonantBreakupError(CausticaError):
    """The input already breaks the caustic where a persisting one is required."""


@dataclass(frozen=True)
class Tolerances:
    zero: float = ZERO_TOL
    obstruction: float = OBSTRUCTION_TOL
    floor: float = ABS_FLOOR

    @classmethod
    def from_dict(cls, d: dict | None) -> "Tolerances":
        d = dict(d or {})
        unknown = set(d) - {"zero", "obstruction", "floor"}
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        for key, value in d.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise ValueError(f"tolerance {key} must be a non-negative number")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True)
class Persists:
    k: int
    theta: TrigPoly
    phi: TrigPoly
    psi: TrigPoly

    persists = True


@dataclass(frozen=True)
class Breaks:
    k: int
    resonant_part: TrigPoly
    melnikov_potential: TrigPoly
    correction: TrigPoly
    obstructions: tuple

    persists = False


StepOutcome = Persists | Breaks


@dataclass
class PersistenceReport:
    rot: RotationNumber
    verified_order: int
    breaking_order: int | None
    obstructions: list = field(default_factory=list)
    melnikov: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    corrections: list = field(default_factory=list)
    lengths: list = field(default_factory=list)
    max_order: int = 0
    state: ExpansionState | None = field(default=None, repr=False)

    def to_json_obj(self) -> dict:
        def poly(a):
            return a.to_float().normalize(tol=0.0).to_json_obj(clean=OUTPUT_CLEAN)

        return {
            "p": self.rot.p,
            "q": self.rot.q,
            "verified_order": self.verified_order,
            "breaking_order": self.breaking_order,
            "obstructions": [
                {"k": k, "l": l, "re": float(complex(v).real), "im": float(complex(v).imag)}
                for k, l, v in self.obstructions
            ],
            "melnikov": [poly(a) for a in self.melnikov],
            "zeta": [poly(a) for a in self.zeta],
            "correction": [poly(a) for a in self.corrections],
        }


def nu_factor(l: int, rot: RotationNumber) -> float:
    """First-order factor relating the ``l``-th harmonics of ``theta_1`` and ``h_1``."""
    if abs(l) < 2:
        raise ValueError("nu_l is defined for |l| >= 2")
    if l % rot.q == 0:
        raise ValueError(f"l = {l} is resonant for {rot}; nu is infinite there")
    x = math.pi * rot.p / rot.q
    if (2 * l) % rot.q == 0:
        return 1.0 / math.tan(x)
    tl = math.tan(l * x)
    t1 = math.tan(x)
    return (tl - l * t1) / (t1 * tl)


def _check_order_one(h1: TrigPoly, rot: RotationNumber, tol: Tolerances):
    res, thr = resonant_excess(h1, rot, tol.obstruction, tol.floor, include_zero=False)
    if res > thr:
        raise ResonantBreakupError(f"h_1 has resonant harmonics (|.| = {res:.3g}); the caustic breaks at order 1")


def theta1_closed_form(h1: TrigPoly, rot: RotationNumber, tol: Tolerances = Tolerances()) -> TrigPoly:
    """``theta_1`` as the nu-weighted non-resonant part of ``h_1`` (harmonics 0, +-1 dropped)."""
    _check_order_one(h1, rot, tol)
    coeffs = {}
    for l, v in h1.coeffs.items():
        if abs(l) >= 2 and l % rot.q != 0:
            coeffs[l] = nu_factor(l, rot) * complex(v)
    return TrigPoly(coeffs, real=h1.real)


def zeta_extract(Qt_k: TrigPoly, rot: RotationNumber, tol: Tolerances = Tolerances(),
                 scale: float | None = None) -> TrigPoly:
    """Zero-mean ``zeta_k`` with ``s zeta_k' = Qt_k``."""
    _, _, s = rot.constants(Qt_k.extended)
    ref = Qt_k.max_abs() if scale is None else max(scale, Qt_k.max_abs())
    if abs(Qt_k[0]) > max(tol.obstruction * ref, tol.floor):
        raise InconsistencyError(f"Qt has nonzero mean {complex(Qt_k[0]):.3g}")
    return Qt_k.filter(lambda l: l != 0).antiderivative() * (1 / s)


def melnikov_potential(Q_k: TrigPoly, rot: RotationNumber, tol: Tolerances = Tolerances()) -> TrigPoly:
    """Zero-mean antiderivative of ``2 mu{Q_k}``."""
    if abs(Q_k[0]) > max(tol.obstruction * Q_k.max_abs(), tol.floor):
        raise InconsistencyError(f"Q has nonzero mean {complex(Q_k[0]):.3g}")
    return (2 * mu_star(Q_k, rot)).antiderivative()


def compute_correction(Q_k: TrigPoly, rot: RotationNumber, tol: Tolerances = Tolerances()) -> TrigPoly:
    """Support-function correction supported on ``qZ*`` that cancels ``mu{Q_k}``."""
    if abs(Q_k[0]) > max(tol.obstruction * Q_k.max_abs(), tol.floor):
        raise InconsistencyError(f"Q has nonzero mean {complex(Q_k[0]):.3g}; no periodic correction exists")
    _, _, s = rot.constants(Q_k.extended)
    return -(mu_star(Q_k, rot).antiderivative() * (1 / s))


def obstruction_harmonics(Q_k: TrigPoly, rot: RotationNumber, k: int, tol: Tolerances = Tolerances()):
    """``(k, l, amplitude)`` of ``h_k + zeta_k`` on resonant harmonics above threshold."""
    _, _, s = rot.constants(Q_k.extended)
    thr = max(tol.obstruction * Q_k.max_abs(), tol.floor)
    out = []
    for l, v in sorted(Q_k.coeffs.items()):
        if l != 0 and l % rot.q == 0 and abs(v) > thr:
            out.append((k, l, complex(v / (1j * l * s))))
    return tuple(out)


def new_state(spec: DeformationSpec | list, rot: RotationNumber, max_order: int,
              extended: bool = False) -> ExpansionState:
    h = spec.orders(max_order) if isinstance(spec, DeformationSpec) else list(spec)
    return ExpansionState(rot=rot, h=h[:max_order], extended=extended)


def persistence_step(state: ExpansionState, k: int, tol: Tolerances = Tolerances()) -> StepOutcome:
    """Advance the recursion to order ``k``.

    On persistence the new coefficients are appended to ``state``.  On
    breakup the state keeps ``Q_k``, ``Rt_k`` and ``zeta_k`` for reporting
    but its verified order stays at ``k - 1``.
    """
    if state.order != k - 1:
        raise PreconditionError(f"state is verified to order {state.order}; cannot step to {k}")
    rot = state.rot
    _, c, s = state.constants
    Q, Rt = qr_coeffs(state, k)
    scale = max(Q.max_abs(), state.dh_order(k).max_abs() * float(s))
    mean_thr = max(tol.obstruction * scale, tol.floor)
    if abs(Q[0]) > mean_thr:
        raise InconsistencyError(f"order {k}: Q_k has nonzero mean {complex(Q[0]):.3g} although lower orders persist")
    Qt = Q - s * state.dh_order(k)
    zeta = zeta_extract(Qt, rot, tol, scale=scale)
    _store(state, k, Q=Q, Rt=Rt, zeta=zeta)
    res, thr = resonant_excess(Q, rot, tol.obstruction, tol.floor, include_zero=False)
    if res > thr:
        return Breaks(
            k=k,
            resonant_part=mu_star(Q, rot),
            melnikov_potential=melnikov_potential(Q, rot, tol),
            correction=compute_correction(Q, rot, tol),
            obstructions=obstruction_harmonics(Q, rot, k, tol),
        )
    Q = Q.filter(lambda l: l % rot.q != 0)
    rhs = (delta(Rt, rot) - sigma(Q, rot)) * (1 / s)
    rhs = rhs.filter(lambda l: l % rot.q != 0)
    theta = invert_delta(rhs, rot, tol=tol.zero, floor=tol.floor)
    phi = invert_delta(2 * theta, rot, tol=tol.zero, floor=tol.floor)
    psi = phi + theta
    state.theta.append(theta)
    state.phi.append(phi)
    state.psi.append(psi)
    Sk, Ck = sincos_coeffs(state, k)
    state.S.append(Sk)
    state.C.append(Ck)
    state.order = k
    return Persists(k=k, theta=theta, phi=phi, psi=psi)


def _store(state: ExpansionState, k: int, **items):
    for name, value in items.items():
        seq = getattr(state, name)
        if len(seq) == k:
            seq.append(value)
        elif len(seq) > k:
            seq[k] = value
        else:
            raise PreconditionError(f"{name} is missing orders below {k}")


def _rewind(state: ExpansionState, k: int):
    """Forget order-``k`` data of a broken step so it can be redone."""
    for name in ("Q", "Rt", "zeta", "H", "Hp"):
        seq = getattr(state, name)
        del seq[k:]


def length_coefficient(state: ExpansionState, k: int) -> complex:
    """Order-``k`` coefficient of ``L = 2 q mu{h(psi) sin(theta)}`` (its mean)."""
    rot = state.rot
    total = TrigPoly()
    for l in range(0, k + 1):
        if l < len(state.H) and k - l < len(state.S):
            total = total + state.H[l] * state.S[k - l]
    return 2 * rot.q * complex(total[0])


def run_analysis(spec, rot: RotationNumber, max_order: int = DEFAULT_MAX_ORDER,
                 tol: Tolerances = Tolerances(), extended: bool = False, dps: int = 50,
                 state: ExpansionState | None = None) -> PersistenceReport:
    """Run the recursion up to ``max_order`` and stop at the first breakup."""
    if max_order < 1:
        raise ValueError("max_order must be at least 1")
    if max_order > HARD_MAX_ORDER:
        raise ValueError(f"max_order {max_order} exceeds the hard cap {HARD_MAX_ORDER}")
    if extended:
        with mpmath.workdps(dps):
            return _run(spec, rot, max_order, tol, True, state)
    return _run(spec, rot, max_order, tol, False, state)


def _run(spec, rot, max_order, tol, extended, state):
    if state is None:
        state = new_state(spec, rot, max_order, extended)
    report = PersistenceReport(rot=rot, verified_order=state.order, breaking_order=None,
                               max_order=max_order, state=state)
    for k in range(state.order + 1, max_order + 1):
        outcome = persistence_step(state, k, tol)
        report.zeta.append(state.zeta[k])
        if isinstance(outcome, Breaks):
            report.breaking_order = k
            report.obstructions.extend(outcome.obstructions)
            report.melnikov.append(outcome.melnikov_potential)
            report.corrections.append(outcome.correction)
            break
        report.melnikov.append(TrigPoly())
        report.verified_order = k
    report.lengths = [length_coefficient(state, k) for k in range(0, state.order + 1)]
    return report


CANCEL_TOL = 1e-13


def correct_deformation(spec, rot: RotationNumber, target_order: int,
                        tol: Tolerances = Tolerances(), extended: bool = False,
                        dps: int = 50):
    """Add the correction at every broken order up to ``target_order``.

    Returns the corrected support-function orders ``h_1..h_target`` and the
    report of the corrected run (which reaches ``target_order``) together
    with the list of ``(k, eta_k)`` corrections applied.
    """
    if target_order < 1 or target_order > HARD_MAX_ORDER:
        raise ValueError(f"target order must be in 1..{HARD_MAX_ORDER}")
    ctx = mpmath.workdps(dps) if extended else nullcontext()
    with ctx:
        state = new_state(spec, rot, target_order, extended)
        applied = []
        for k in range(1, target_order + 1):
            outcome = persistence_step(state, k, tol)
            if isinstance(outcome, Breaks):
                eta = outcome.correction
                _rewind(state, k)
                old = state.h_order(k)
                new = old + eta
                # harmonics cancelled by the correction are dropped outright
                floor = CANCEL_TOL * max(old.max_abs(), eta.max_abs())
                state.set_h(k, new.filter(lambda l: abs(new[l]) > floor))
                applied.append((k, eta))
                outcome = persistence_step(state, k, tol)
                if isinstance(outcome, Breaks):
                    raise InconsistencyError(f"order {k} still breaks after correction")
        h = [state.h_order(k) for k in range(1, target_order + 1)]
        report = run_analysis(h, rot, target_order, tol, extended, dps)
    return h, report, applied


def zeta3_reference(state: ExpansionState) -> TrigPoly:
    """Closed-form third-order ``zeta`` from ``h_1``, ``theta_1``, ``theta_2``, ``psi_1`` (mean removed)."""
    if state.order < 2:
        raise PreconditionError("orders 1 and 2 must persist before evaluating zeta_3")
    _, c, s = state.constants
    h1 = state.h_order(1)
    th1, th2, ps1 = state.theta[1], state.theta[2], state.psi[1]
    z = (th1 * th2 + h1 * th1 * th1 * 0.5 - h1.derivative(2) * ps1 * ps1 * 0.5
         + th1 * th1 * th1 * (c / (3 * s)) - h1.derivative() * th1 * ps1 * (c / s))
    return z.filter(lambda l: l != 0)
