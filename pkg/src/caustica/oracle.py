"""
Numerical billiard map in line coordinates and residual checks.

A line is ``(phi, lambda)``: the direction of its right normal and its
signed distance to the origin.  One bounce maps ``(phi, lambda)`` to
``(phi1, lambda1)`` through the implicit relations

    lambda  = h(psi) cos(theta) - h'(psi) sin(theta)
    lambda1 = h(psi) cos(theta) + h'(psi) sin(theta)

with ``psi = (phi1 + phi)/2`` and ``theta = (phi1 - phi)/2``.  All pointwise
work runs in mpmath so that residuals far below double precision can be
measured.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .deformations import DeformationSpec
from .expansions import ExpansionState
from .fourier import CausticaError, RotationNumber, TrigPoly

CONVEXITY_GRID = 1024
RESIDUAL_GRID = 256
MAX_NEWTON_ITER = 64
DEFAULT_DPS = 50
DEFAULT_SWEEP = (1e-2, 1e-5, 7)


class OracleError(CausticaError):
    """Numerical billiard evaluation failed (non-convex table, lost root, ...)."""


@dataclass(frozen=True)
class LineCoords:
    phi: mpmath.mpf
    lam: mpmath.mpf


def _mpc_coeffs(a: TrigPoly) -> dict[int, mpmath.mpc]:
    return {l: mpmath.mpc(v) if not isinstance(v, mpmath.mpc) else v for l, v in a.coeffs.items()}


class _RealSeries:
    """Real trigonometric polynomial ``a_0 + sum_{l>0} 2 Re(a_l e^{ilt})`` for mpmath evaluation."""

    def __init__(self, coeffs: dict[int, mpmath.mpc]):
        self.a0 = mpmath.re(coeffs.get(0, mpmath.mpc(0)))
        n = max((abs(l) for l in coeffs), default=0)
        self.pos = [2 * coeffs.get(l, mpmath.mpc(0)) for l in range(1, n + 1)]

    def values(self, t, derivatives: int = 0):
        """``f, f', ..., f^(derivatives)`` at ``t``."""
        z = mpmath.expj(t)
        w = mpmath.mpc(1)
        out = [self.a0] + [mpmath.mpf(0)] * derivatives
        for l, c in enumerate(self.pos, start=1):
            w = w * z
            term = c * w
            ik = mpmath.mpc(1)
            for d in range(derivatives + 1):
                out[d] += mpmath.re(term * ik)
                ik = ik * mpmath.mpc(0, l)
        return out


def _combine(orders, epsilon, upto: int) -> dict[int, mpmath.mpc]:
    # coefficients of sum_{k=1}^{upto} eps^k a_k
    acc: dict[int, mpmath.mpc] = {}
    ek = mpmath.mpf(1)
    for k in range(1, upto + 1):
        ek = ek * epsilon
        if k >= len(orders) or orders[k] is None:
            continue
        for l, v in _mpc_coeffs(orders[k]).items():
            acc[l] = acc.get(l, mpmath.mpc(0)) + ek * v
    return acc


class SupportEvaluator:
    """Truncated support function ``h(psi; eps) = 1 + sum_{k<=K} eps^k h_k(psi)``.

    Parameters
    ----------
    spec : DeformationSpec or sequence of TrigPoly
        Deformation (``h_1, h_2, ...`` when a sequence).
    epsilon : float
        Perturbation size.
    truncation : int
        Number ``K`` of orders kept.
    dps : int
        mpmath working precision for pointwise evaluation.
    grid : int
        Number of points used for the convexity check.

    Raises
    ------
    OracleError
        If ``h <= 0`` or ``h + h'' <= 0`` somewhere on the grid.
    """

    def __init__(self, spec, epsilon: float, truncation: int, dps: int = DEFAULT_DPS,
                 grid: int = CONVEXITY_GRID):
        if truncation < 0:
            raise ValueError("truncation must be non-negative")
        self.epsilon = epsilon
        self.truncation = truncation
        self.dps = dps
        orders = spec.orders(truncation) if isinstance(spec, DeformationSpec) else list(spec)[:truncation]
        self.orders = [None] + orders
        with mpmath.workdps(dps):
            self._eps = mpmath.mpf(epsilon)
            coeffs = _combine(self.orders, self._eps, truncation)
            coeffs[0] = coeffs.get(0, mpmath.mpc(0)) + 1
            self._series = _RealSeries(coeffs)
        self.min_h, self.min_curvature_radius = self._check_convexity(coeffs, grid)

    def _check_convexity(self, coeffs, grid: int):
        # sign checks only need double precision
        n = max(abs(l) for l in coeffs)
        ls = np.arange(-n, n + 1)
        c = np.array([complex(coeffs.get(int(l), 0)) for l in ls])
        t = 2 * np.pi * np.arange(grid) / grid
        basis = np.exp(1j * np.multiply.outer(t, ls))
        h = (basis @ c).real
        rho = (basis @ (c * (1 - ls**2))).real
        if h.min() <= 0:
            raise OracleError(f"support function not positive at eps={self.epsilon:g} (min {h.min():.3g})")
        if rho.min() <= 0:
            raise OracleError(f"table not strictly convex at eps={self.epsilon:g} (min h+h'' = {rho.min():.3g})")
        return float(h.min()), float(rho.min())

    def __call__(self, psi, derivatives: int = 2):
        with mpmath.workdps(self.dps):
            return self._series.values(mpmath.mpf(psi) if not isinstance(psi, mpmath.mpf) else psi,
                                       derivatives)


def eval_support(ev: SupportEvaluator, psi) -> tuple:
    """``(h, h', h'')`` at ``psi``."""
    h, dh, ddh = ev(psi, 2)
    return h, dh, ddh


def _newton_tol(dps: int) -> mpmath.mpf:
    return mpmath.mpf(10) ** (-(dps - 6))


def billiard_step(line: LineCoords, ev: SupportEvaluator, guess=None) -> LineCoords:
    """One bounce of the billiard map.

    Solves ``F(phi1) = h(psi) cos(theta) - h'(psi) sin(theta) - lambda = 0``
    on the bracket ``(phi, phi + 2 pi)``, where ``F`` decreases from
    ``h(phi) - lambda`` to ``-h(phi + pi) - lambda``.  Newton steps that
    leave the current bracket fall back to bisection.
    """
    with mpmath.workdps(ev.dps):
        phi = mpmath.mpf(line.phi)
        lam = mpmath.mpf(line.lam)
        lo, hi = phi, phi + 2 * mpmath.pi
        f_lo = ev(lo, 0)[0] - lam
        f_hi = -ev(phi + mpmath.pi, 0)[0] - lam
        if not (f_lo > 0 and f_hi < 0):
            raise OracleError(f"line (phi={float(phi):.6g}, lambda={float(lam):.6g}) does not meet the table")
        tol = _newton_tol(ev.dps)
        x = mpmath.mpf(guess) if guess is not None else phi + mpmath.pi
        if not lo < x < hi:
            x = (lo + hi) / 2
        for _ in range(MAX_NEWTON_ITER):
            th = (x - phi) / 2
            h, dh, ddh = ev((x + phi) / 2, 2)
            sin, cos = mpmath.sin(th), mpmath.cos(th)
            F = h * cos - dh * sin - lam
            if abs(F) < tol:
                return LineCoords(x, h * cos + dh * sin)
            if F > 0:
                lo = x
            else:
                hi = x
            dF = -(h + ddh) * sin / 2
            x_new = x - F / dF if dF < 0 else None
            x = x_new if x_new is not None and lo < x_new < hi else (lo + hi) / 2
        raise OracleError(f"Newton did not converge in {MAX_NEWTON_ITER} iterations "
                          f"(phi={float(phi):.6g}, lambda={float(lam):.6g})")


def jacobian_determinant(line: LineCoords, ev: SupportEvaluator, step: float = 1e-6) -> float:
    """Central-difference Jacobian determinant of :func:`billiard_step`."""
    with mpmath.workdps(ev.dps):
        d = mpmath.mpf(step)
        cols = []
        for dphi, dlam in ((d, 0), (0, d)):
            plus = billiard_step(LineCoords(line.phi + dphi, line.lam + dlam), ev)
            minus = billiard_step(LineCoords(line.phi - dphi, line.lam - dlam), ev)
            cols.append(((plus.phi - minus.phi) / (2 * d), (plus.lam - minus.lam) / (2 * d)))
        (a, c), (b, e) = cols
        return float(a * e - b * c)


class CausticFamily:
    """Truncated ``phi(t), theta(t), psi(t)`` of a computed expansion at fixed ``eps``."""

    def __init__(self, state: ExpansionState, epsilon: float, order: int | None = None,
                 dps: int = DEFAULT_DPS):
        m = state.order if order is None else order
        if m > state.order:
            raise ValueError(f"state is only verified to order {state.order}")
        self.order = m
        self.dps = dps
        with mpmath.workdps(dps):
            eps = mpmath.mpf(epsilon)
            self.omega = 2 * mpmath.pi * state.rot.p / state.rot.q
            self._theta = _RealSeries(_combine(state.theta, eps, m))
            self._phi = _RealSeries(_combine(state.phi, eps, m))

    def at(self, t):
        """``(phi, theta, psi)`` at ``t``."""
        th = self._theta.values(t)[0] + self.omega / 2
        ph = self._phi.values(t)[0] + t - self.omega / 2
        return ph, th, ph + th


def _grid(t_grid) -> list:
    if isinstance(t_grid, int):
        return [2 * mpmath.pi * j / t_grid for j in range(t_grid)]
    return [mpmath.mpf(t) for t in t_grid]


def _chord_parts(ev: SupportEvaluator, family: CausticFamily, t):
    _, th, ps = family.at(t)
    h, dh = ev(ps, 1)
    return h * mpmath.cos(th), dh * mpmath.sin(th)


@dataclass
class ResidualSamples:
    t: np.ndarray
    values: list
    max_abs: float


def residual_function(state: ExpansionState, ev: SupportEvaluator, t_grid=RESIDUAL_GRID,
                      order: int | None = None) -> ResidualSamples:
    """Pointwise ``sigma{h'(psi) sin(theta)} - delta{h(psi) cos(theta)}`` for the truncated expansion."""
    family = CausticFamily(state, ev.epsilon, order, ev.dps)
    out = []
    with mpmath.workdps(ev.dps):
        ts = _grid(t_grid)
        for t in ts:
            f0, g0 = _chord_parts(ev, family, t)
            f1, g1 = _chord_parts(ev, family, t + family.omega)
            out.append(g1 + g0 - (f1 - f0))
        mx = max(abs(v) for v in out)
    return ResidualSamples(np.array([float(t) for t in ts]), out, float(mx))


@dataclass
class InvarianceSamples:
    t: np.ndarray
    horizontal: list
    vertical: list
    max_horizontal: float
    max_vertical: float


def invariance_residual(state: ExpansionState, ev: SupportEvaluator, t_grid=RESIDUAL_GRID,
                        order: int | None = None) -> InvarianceSamples:
    """Gap ``f(c(t)) - c(t + omega)`` of the line family ``c(t) = (phi(t), lambda(t))``."""
    family = CausticFamily(state, ev.epsilon, order, ev.dps)
    hor, ver = [], []
    with mpmath.workdps(ev.dps):
        ts = _grid(t_grid)
        for t in ts:
            ph, th, _ = family.at(t)
            f, g = _chord_parts(ev, family, t)
            image = billiard_step(LineCoords(ph, f - g), ev, guess=ph + 2 * th)
            ph1, _, _ = family.at(t + family.omega)
            f1, g1 = _chord_parts(ev, family, t + family.omega)
            hor.append(image.phi - ph1)
            ver.append(image.lam - (f1 - g1))
        mh = max(abs(v) for v in hor)
        mv = max(abs(v) for v in ver)
    return InvarianceSamples(np.array([float(t) for t in ts]), hor, ver, float(mh), float(mv))


@dataclass
class OrbitDiagnostics:
    length: float
    length_spread: float
    mean_tangential: float
    theta_average_error: float


def action_and_identities(ev: SupportEvaluator, rot: RotationNumber, state: ExpansionState,
                          t_grid=64, order: int | None = None) -> OrbitDiagnostics:
    """Periodic-orbit length and averaged identities along the truncated family.

    ``L = 2 q mu{h(psi) sin(theta)}`` should not depend on ``t``,
    ``mu{h'(psi) sin(theta)}`` should vanish and ``mu{theta}`` equals ``pi p/q``.
    """
    family = CausticFamily(state, ev.epsilon, order, ev.dps)
    q = rot.q
    lengths, tangential, theta_err = [], [], []
    with mpmath.workdps(ev.dps):
        for t in _grid(t_grid):
            L = T = Th = mpmath.mpf(0)
            for j in range(q):
                _, th, ps = family.at(t + j * family.omega)
                h, dh = ev(ps, 1)
                L += h * mpmath.sin(th)
                T += dh * mpmath.sin(th)
                Th += th
            lengths.append(2 * L)
            tangential.append(abs(T / q))
            theta_err.append(abs(Th / q - mpmath.pi * rot.p / q))
        mean_length = sum(lengths) / len(lengths)
        return OrbitDiagnostics(
            length=float(mean_length),
            length_spread=float(max(lengths) - min(lengths)),
            mean_tangential=float(max(tangential)),
            theta_average_error=float(max(theta_err)),
        )


@dataclass
class ScalingFit:
    slope: float | None
    r2: float | None
    used: int
    beyond_measurable: bool


def scaling_fit(pairs, floor: float = 1e2 * np.finfo(float).eps) -> ScalingFit:
    """Least-squares slope of ``log(residual)`` against ``log(eps)``.

    Points with residual at or below ``floor`` are dropped; when fewer than
    three remain the residual is reported as beyond the measurable order.
    """
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("a scaling fit needs at least 3 (eps, residual) pairs")
    eps = np.array([float(e) for e, _ in pairs])
    if np.any(eps <= 0):
        raise ValueError("epsilon values must be positive")
    if math.log10(eps.max() / eps.min()) < 2 - 1e-9:
        raise ValueError("epsilon values must span at least two decades")
    res = np.array([float(r) for _, r in pairs])
    keep = res > floor
    if keep.sum() < 3:
        return ScalingFit(None, None, int(keep.sum()), True)
    x, y = np.log(eps[keep]), np.log(res[keep])
    slope, icept = np.polyfit(x, y, 1)
    fitted = slope * x + icept
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(((y - fitted) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), r2, int(keep.sum()), False)


@dataclass
class CausticSamples:
    phi: np.ndarray
    g: np.ndarray
    min_g: float
    min_curvature_radius: float


def reconstruct_caustic(state: ExpansionState, ev: SupportEvaluator, t_grid=RESIDUAL_GRID,
                        order: int | None = None) -> CausticSamples:
    """Sample the approximate caustic as ``phi(t) -> g(phi(t)) = lambda(t)``.

    The curvature proxy ``g + g''`` uses periodic central differences in ``t``.

    Raises
    ------
    OracleError
        If ``phi`` is not increasing along the grid (no graph over ``phi``).
    """
    if isinstance(t_grid, int):
        n = t_grid
    else:
        raise ValueError("reconstruct_caustic needs a uniform grid size")
    family = CausticFamily(state, ev.epsilon, order, ev.dps)
    phis, gs = [], []
    with mpmath.workdps(ev.dps):
        for t in _grid(n):
            ph, _, _ = family.at(t)
            f, g = _chord_parts(ev, family, t)
            phis.append(float(ph))
            gs.append(float(f - g))
    phi = np.array(phis)
    g = np.array(gs)
    dphi = np.diff(np.append(phi, phi[0] + 2 * np.pi))
    if np.any(dphi <= 0):
        raise OracleError(f"caustic is not a graph over phi at eps={ev.epsilon:g}")
    # derivatives with respect to phi through the chain rule on the t grid
    dt = 2 * np.pi / n
    phi_t = (np.roll(phi, -1) - np.roll(phi, 1) + 2 * np.pi * (np.arange(n) == n - 1)
             + 2 * np.pi * (np.arange(n) == 0)) / (2 * dt)
    g_t = (np.roll(g, -1) - np.roll(g, 1)) / (2 * dt)
    gp = g_t / phi_t
    gpp = (np.roll(gp, -1) - np.roll(gp, 1)) / (2 * dt) / phi_t
    return CausticSamples(phi, g, float(g.min()), float((g + gpp).min()))


def residual_csv(samples: ResidualSamples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "residual"])
    for t, v in zip(samples.t, samples.values):
        w.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()


def sweep_csv(pairs) -> str:
    """``epsilon,max_residual,slope_window`` rows; the window slope joins each point to the previous one."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "max_residual", "slope_window"])
    prev = None
    for eps, r in pairs:
        eps, r = float(eps), float(r)
        slope = ""
        if prev is not None and r > 0 and prev[1] > 0:
            slope = repr(math.log(r / prev[1]) / math.log(eps / prev[0]))
        w.writerow([repr(eps), repr(r), slope])
        prev = (eps, r)
    return buf.getvalue()


def eps_sweep(lo: float, hi: float, n: int) -> list[float]:
    """Geometric grid from ``lo`` to ``hi`` with ``n`` points."""
    if n < 3:
        raise ValueError("an epsilon sweep needs at least 3 points")
    if lo <= 0 or hi <= 0:
        raise ValueError("epsilon values must be positive")
    return [float(v) for v in np.geomspace(lo, hi, n)]
