"""Conjugated operator data and the moment map of the geodesic flow.

Conjugating the Laplace-Beltrami operator by u -> A^{1/2} u turns spectral
analysis on L^2(A dx dtheta) into a flat problem on L^2(dx dtheta) with

    -Delta~ = -d^2/dx^2 - A^{-2}(x) d^2/dtheta^2 + V1(x),
    V1 = (1/2) A'' A^{-1} - (1/4) (A')^2 A^{-2}.

After separation in theta the radial family is (hD)^2 + V(x) - z with
V = V0 + h^2 V1, V0 = A^{-2}, h = 1/|k| and z = h^2 lambda^2.

The geodesic Hamiltonian xi^2 + A^{-2} eta^2 conserves eta; the joint map
(x, xi, theta, eta) -> (xi^2 + V0 eta^2, eta^2) stratifies phase space by
rank, and rank <= 1 points project to the critical set of V0 on the circle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .profiles import GeneratingCurve, TWO_PI

_RANGE_N = 2 ** 16
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class EffectivePotential:
    """V0 = A^{-2}, its derivatives, the subprincipal V1, and A extrema."""
    period: float
    v0: Callable
    v0p: Callable
    v0pp: Callable
    v1: Callable
    a_min: float
    a_max: float
    curve: Optional[GeneratingCurve] = None

    @property
    def v0_range(self):
        return (self.a_max ** -2, self.a_min ** -2)

    def v_at(self, h: float) -> Callable:
        """The full potential V = V0 + h^2 V1 at semiclassical scale h."""
        return lambda x: self.v0(x) + h * h * self.v1(x)


@dataclass(frozen=True)
class PhasePoint:
    """(x, xi; eta) with theta suppressed: all symbols are theta-invariant."""
    x: float
    xi: float
    eta: float


def effective_potential(curve: GeneratingCurve) -> EffectivePotential:
    A, dA, ddA = curve.A, curve.dA, curve.ddA

    def v0(x):
        return A(x) ** -2.0

    def v0p(x):
        return -2.0 * dA(x) * A(x) ** -3.0

    def v0pp(x):
        a = A(x)
        return -2.0 * ddA(x) * a ** -3.0 + 6.0 * dA(x) ** 2 * a ** -4.0

    def v1(x):
        a = A(x)
        return 0.5 * ddA(x) / a - 0.25 * (dA(x) / a) ** 2

    x = np.arange(_RANGE_N) * (curve.period / _RANGE_N)
    ax = A(x)
    return EffectivePotential(period=curve.period, v0=v0, v0p=v0p, v0pp=v0pp, v1=v1,
                              a_min=float(np.min(ax)), a_max=float(np.max(ax)),
                              curve=curve)


def moment_map(pot: EffectivePotential, pt: PhasePoint):
    p = pt.xi ** 2 + float(pot.v0(pt.x)) * pt.eta ** 2
    q = pt.eta ** 2
    return p, q


def moment_map_rank(pot: EffectivePotential, pt: PhasePoint):
    """Values (p, q) of the conserved pair and the rank of its Jacobian.

    Columns are ordered (x, xi, theta, eta); the theta column is identically
    zero.  Rank uses singular values with a tolerance relative to the largest
    row norm, so exact-zero structure is detected scale-free.
    """
    v0x = float(pot.v0(pt.x))
    v0px = float(pot.v0p(pt.x))
    jac = np.array([
        [v0px * pt.eta ** 2, 2.0 * pt.xi, 0.0, 2.0 * v0x * pt.eta],
        [0.0, 0.0, 0.0, 2.0 * pt.eta],
    ])
    scale = np.max(np.linalg.norm(jac, axis=1))
    if scale == 0.0:
        return moment_map(pot, pt), 0
    s = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(s > _RANK_TOL * scale))
    return moment_map(pot, pt), rank


def critical_rank_set(pot: EffectivePotential, pt: PhasePoint, slope_tol: float = 1e-12) -> bool:
    """Closed-form membership test for {rank <= 1} = {eta = 0} u {xi = 0, v0' = 0}."""
    if pt.eta == 0.0:
        return True
    return pt.xi == 0.0 and abs(float(pot.v0p(pt.x))) <= slope_tol


def _v0_series(pot: EffectivePotential, n: int = 1024):
    """Real trig-series coefficients of v0 for the flow kernel."""
    x = np.arange(n) * (pot.period / n)
    fhat = np.fft.rfft(pot.v0(x)) / n
    cos_c = 2.0 * np.real(fhat)
    sin_c = -2.0 * np.imag(fhat)
    cos_c[0] *= 0.5
    if n % 2 == 0:
        cos_c[-1] *= 0.5
    return cos_c, sin_c, TWO_PI / pot.period


def flow_conservation_drift(pot: EffectivePotential, pt: PhasePoint,
                            t_end: Optional[float] = None, dt: float = 1e-3) -> float:
    """Integrate Hamilton's equations for p0 = xi^2 + v0(x) eta^2 at fixed eta
    over one period of time and return the maximal drift of p0.

    Uses the jitted symplectic integrator (4th-order Yoshida composition);
    v0 is fed to the kernel as a truncated trig series, which is spectrally
    accurate for the analytic catalog profiles.
    """
    cos_c, sin_c, base = _v0_series(pot)
    t_end = pot.period if t_end is None else t_end
    n_steps = int(np.ceil(t_end / dt))
    _, _, drift = _kernels.flow_drift(pt.x, pt.xi, pt.eta ** 2, cos_c, sin_c, base, dt, n_steps)
    return float(drift)


def moment_map_samples(pot: EffectivePotential, nx: int = 64, nxi: int = 5, neta: int = 5):
    """Sample (x, xi, eta, p, q, rank) on a lattice for phase-portrait export."""
    xs = np.arange(nx) * (pot.period / nx)
    xis = np.linspace(-1.0, 1.0, nxi)
    etas = np.linspace(-1.0, 1.0, neta)
    rows = []
    for x in xs:
        for xi in xis:
            for eta in etas:
                (p, q), rank = moment_map_rank(pot, PhasePoint(x, xi, eta))
                rows.append((float(x), float(xi), float(eta), float(p), float(q), rank))
    return rows
