"""Band-mass measurements on rotationally invariant neighbourhoods.

A band Omega = (a, b)_x x S^1_theta meets a joint eigenmode e^{ik theta}
phi_k(x) in the mass integral of |phi_k|^2 over (a, b) (after conjugation the
flat and volume measures carry the same information; both are offered).  For
single-k families swept in lambda the measured masses either vanish faster
than any power (surrogate: below lambda^{-N0}) or stay bounded below up to a
slowly varying factor; the fitted decay exponent gamma of mass ~ lambda^{-gamma}
is compared against the ceiling 1 + eps.  Propagating (psi0) families must be
uniformly distributed: band mass bounded below with a bounded max/min ratio.

Whether a mode's phase-space support actually meets a band is decided by a
windowed-Fourier (Husimi) proxy: Gaussian-window mass summed over a lattice
covering the band at the classically allowed frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .geometry import EffectivePotential
from .microlocal import RateFit
from .spectral import Grid, SurfaceMode, modes_for_k

_VANISHING_DEGREE = 6
_EPS_ACCEPT = 0.2
_WAVEFRONT_THRESHOLD = 1e-4


@dataclass(frozen=True)
class BandRegion:
    """Omega = (a, b)_x x S^1_theta."""
    a: float
    b: float
    label: str = ""

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("band endpoints must differ modulo the period")


@dataclass
class ModeFamily:
    """Modes sharing a selector, sorted by lambda."""
    selector: str
    members: List[SurfaceMode]

    def __post_init__(self):
        self.members = sorted(self.members, key=lambda m: m.lambda_sq)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.members])

    def check_rate_ready(self):
        lams = self.lambdas
        if len(lams) < 5 or lams[-1] < 4.0 * lams[0]:
            raise ValueError(
                f"family {self.selector!r} needs >= 5 members spanning a lambda-factor >= 4")


# ---------------------------------------------------------------------------
# band masses


def band_mass(mode: SurfaceMode, band: BandRegion, measure: str = "flat",
              curve=None) -> float:
    """Relative mass of |phi|^2 over (a, b), trapezoid with interpolated
    partial end cells; measure 'volume' weights by A(x)."""
    grid = mode.grid
    n, dx, L = grid.n, grid.spacing, grid.period
    width = (band.b - band.a) % L
    if width < 4.0 * dx:
        raise ValueError(f"band ({band.a}, {band.b}) shorter than 4 grid cells")
    f = np.abs(mode.phi) ** 2
    if measure == "volume":
        if curve is None:
            raise ValueError("volume measure needs the generating curve")
        f = f * np.asarray(curve.A(grid.nodes), dtype=float)
    elif measure != "flat":
        raise ValueError(f"unknown measure {measure!r}")
    total = float(np.sum(f) * dx)

    def cum(t):
        # integral of the piecewise-linear interpolant from node 0 to t
        i = int(t // dx)
        frac = (t - i * dx) / dx
        fi = f[i % n]
        ft = fi + frac * (f[(i + 1) % n] - fi)
        full = dx * (0.5 * f[0] + float(np.sum(f[1:i])) + 0.5 * fi) if i > 0 else 0.0
        return full + 0.5 * (fi + ft) * frac * dx

    a, b = band.a % L, band.b % L
    m = cum(b) - cum(a) if b >= a else total - cum(a) + cum(b)
    return min(max(m / total, 0.0), 1.0)


def mass_rate_fit(family: ModeFamily, band: BandRegion, measure: str = "flat",
                  curve=None, vacuous: bool = False) -> RateFit:
    """Fit mass ~ lambda^{-gamma} over the family (exponent field = gamma)."""
    family.check_rate_ready()
    lams = family.lambdas
    masses = np.array([band_mass(m, band, measure=measure, curve=curve)
                       for m in family.members])
    if np.any(masses <= 0):
        raise ValueError("mass rate fit needs strictly positive band masses")
    X, Y = np.log(lams), np.log(masses)
    A = np.column_stack([np.ones_like(X), -X])
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    return RateFit(exponent=float(coef[1]), log_gamma=0.0, intercept=float(coef[0]),
                   residual_rms=rms, h_list=tuple(float(v) for v in lams),
                   g_list=tuple(float(v) for v in masses),
                   n_list=tuple(m.grid.n for m in family.members),
                   model="pure-power", reliable=not vacuous)


def uniform_mass_check(family: ModeFamily, band: BandRegion, measure: str = "flat",
                       curve=None) -> Tuple[float, float]:
    """(min mass, max/min ratio) over a psi0-class family."""
    if not family.members:
        raise ValueError("empty family")
    bad = [m.psi_class for m in family.members if m.psi_class != "psi0"]
    if bad:
        raise ValueError(f"uniform mass check expects psi0 members, found {set(bad)}")
    masses = np.array([band_mass(m, band, measure=measure, curve=curve)
                       for m in family.members])
    lo = float(np.min(masses))
    hi = float(np.max(masses))
    return lo, (hi / lo if lo > 0 else math.inf)


# ---------------------------------------------------------------------------
# wavefront proxy


def husimi_band_mass(mode: SurfaceMode, band: BandRegion, pot: EffectivePotential,
                     xi_pad_sigmas: float = 3.0) -> float:
    """Windowed-Fourier mass of phi over the band at the classically allowed
    frequencies, at scale h = 1/lambda."""
    lam = mode.lam
    if lam <= 0:
        return 0.0
    h = 1.0 / lam
    grid = mode.grid
    L = grid.period
    sigma = math.sqrt(h)
    sigma_xi = h / sigma
    width = (band.b - band.a) % L
    k_c = max(int(width / (0.5 * sigma)), 1)
    centers = (band.a + (np.arange(k_c) + 0.5) * width / k_c) % L
    # allowed |xi| on the band for the symbol xi^2 + eta^2 v0(x) = 1
    allowed = 1.0 - mode.eta ** 2 * np.asarray(pot.v0(centers), dtype=float)
    xi_max = math.sqrt(max(float(np.max(allowed)), 0.0))
    lim = xi_max + xi_pad_sigmas * sigma_xi
    k_x = max(int(2.0 * lim / (0.5 * sigma_xi)), 1)
    xis = np.linspace(-lim, lim, k_x)
    cell = (width / k_c) * (xis[1] - xis[0] if k_x > 1 else 2.0 * lim)
    total = _kernels.husimi_mass(mode.phi * math.sqrt(grid.spacing), grid.nodes, L,
                                 h, sigma, centers, xis)
    return float(total * cell)


# ---------------------------------------------------------------------------
# the dichotomy


@dataclass
class DichotomyReport:
    band: BandRegion
    selector: str
    branch: str                      # vanishing | lower-bounded | inconclusive
    gamma_fit: Optional[RateFit]
    wavefront_meets_band: bool
    verdict: str                     # PASS | FAIL | INCONCLUSIVE
    masses: Tuple[float, ...] = ()
    lambdas: Tuple[float, ...] = ()
    vanishing_degree: int = _VANISHING_DEGREE
    eps_accept: float = _EPS_ACCEPT


def dichotomy_report(family: ModeFamily, band: BandRegion, pot: EffectivePotential,
                     vanishing_degree: int = _VANISHING_DEGREE,
                     eps_accept: float = _EPS_ACCEPT,
                     wavefront_threshold: float = _WAVEFRONT_THRESHOLD,
                     measure: str = "flat") -> DichotomyReport:
    """Classify a (family, band) pair onto the mass dichotomy.

    vanishing: every member's mass <= lambda^{-N0}; lower-bounded: none is,
    and the fitted gamma is compared to the ceiling 1 + eps_accept; mixed
    memberships are reported inconclusive, never passed silently."""
    curve = pot.curve
    masses = np.array([band_mass(m, band, measure=measure, curve=curve)
                       for m in family.members])
    lams = family.lambdas
    below = masses <= lams ** (-float(vanishing_degree))
    meets = [husimi_band_mass(m, band, pot) > wavefront_threshold
             for m in family.members]
    wavefront = bool(all(meets))
    if bool(np.all(below)):
        branch, fit, verdict = "vanishing", None, "PASS"
    elif not np.any(below):
        fit = mass_rate_fit(family, band, measure=measure, curve=curve,
                            vacuous=not wavefront)
        branch = "lower-bounded"
        verdict = "PASS" if fit.exponent <= 1.0 + eps_accept else "FAIL"
    else:
        branch, fit, verdict = "inconclusive", None, "INCONCLUSIVE"
    return DichotomyReport(band=band, selector=family.selector, branch=branch,
                           gamma_fit=fit, wavefront_meets_band=wavefront,
                           verdict=verdict, masses=tuple(float(v) for v in masses),
                           lambdas=tuple(float(v) for v in lams),
                           vanishing_degree=vanishing_degree, eps_accept=eps_accept)


# ---------------------------------------------------------------------------
# family builders


def grid_for_lambda(lam_max: float, period: float, n_min: int = 512,
                    n_max: int = 4096) -> Grid:
    """Enough points to resolve oscillation at frequency lambda."""
    want = 4.0 * lam_max * period / (2.0 * np.pi)
    n = 2 ** int(math.ceil(math.log2(max(want, n_min))))
    return Grid(n=min(max(n, n_min), n_max), period=period)


def well_family(pot: EffectivePotential, k_list: Sequence[int],
                scheme: str = "spectral", grid: Optional[Grid] = None) -> ModeFamily:
    """Ground modes of L_k: concentrate at the stable minimum of V0."""
    members = []
    for k in k_list:
        g = grid or grid_for_lambda(abs(k) / math.sqrt(pot.v0_range[1]) + 10.0, pot.period)
        batch = modes_for_k(pot, int(k), g, scheme)
        members.append(batch[0])
    return ModeFamily(selector="well: ground modes of L_k", members=members)


def barrier_family(pot: EffectivePotential, level: float, k_list: Sequence[int],
                   scheme: str = "spectral", grid: Optional[Grid] = None) -> ModeFamily:
    """Per k, the mode with lambda^2 nearest k^2 * level."""
    members = []
    for k in k_list:
        g = grid or grid_for_lambda(abs(k) * math.sqrt(level) + 20.0, pot.period)
        batch = modes_for_k(pot, int(k), g, scheme)
        target = k * k * level
        best = min(batch, key=lambda m: abs(m.lambda_sq - target))
        members.append(best)
    return ModeFamily(selector=f"barrier: lambda^2 nearest k^2 * {level:g}",
                      members=members)


def fixed_k_family(pot: EffectivePotential, k: int, lam_lo: float, lam_hi: float,
                   scheme: str = "spectral", grid: Optional[Grid] = None,
                   psi_class: Optional[str] = None) -> ModeFamily:
    """All modes of one angular momentum with lambda in [lam_lo, lam_hi]."""
    g = grid or grid_for_lambda(lam_hi, pot.period)
    batch = modes_for_k(pot, int(k), g, scheme, window=(lam_lo ** 2, lam_hi ** 2))
    if psi_class is not None:
        batch = [m for m in batch if m.psi_class == psi_class]
    return ModeFamily(selector=f"fixed k = {k}, lambda in [{lam_lo:g}, {lam_hi:g}]",
                      members=batch)


def gaussian_theta_packet(modes: Sequence[SurfaceMode], k0: int,
                          width: float) -> List[Tuple[int, complex]]:
    """Gaussian angular-momentum weights for fourier-spread demonstrations."""
    out = []
    norm = 0.0
    for m in modes:
        c = math.exp(-((m.k - k0) ** 2) / (2.0 * width * width))
        out.append((m.k, complex(c)))
        norm += c * c
    norm = math.sqrt(norm) if norm > 0 else 1.0
    return [(k, c / norm) for k, c in out]


def quasimode_packet(pot: EffectivePotential, k: int, lam_center: float,
                     lam_halfwidth: float, scheme: str = "spectral",
                     grid: Optional[Grid] = None):
    """Single-k packet of eigenmodes inside a lambda window: a synthetic weak
    quasimode whose defect is set by the window width.

    Returns (modes, coefficients, residual_order) where residual_order is the
    beta_0 with ||(-Delta~ - lam_center^2) u|| = lam_center^{-beta_0}."""
    g = grid or grid_for_lambda(lam_center + lam_halfwidth, pot.period)
    lo, hi = lam_center - lam_halfwidth, lam_center + lam_halfwidth
    fam = fixed_k_family(pot, k, lo, hi, scheme=scheme, grid=g)
    if not fam.members:
        raise ValueError("no eigenmodes inside the requested lambda window")
    ws = np.array([math.exp(-((m.lam - lam_center) / max(lam_halfwidth, 1e-12)) ** 2)
                   for m in fam.members])
    ws = ws / math.sqrt(float(np.sum(ws * ws)))
    defect = math.sqrt(float(np.sum((ws * np.array(
        [m.lambda_sq - lam_center ** 2 for m in fam.members])) ** 2)))
    beta0 = -math.log(max(defect, 1e-300)) / math.log(lam_center) if lam_center > 1 else 0.0
    return fam.members, [complex(w) for w in ws], float(beta0)
