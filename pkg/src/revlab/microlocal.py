"""Discrete phase-space compressions and microlocal gap measurements.

The compression Phi = M_chi F* M_psi F M_chi sandwiches a frequency cutoff
between spatial cutoffs (F unitary DFT; chi, psi cosine-tapered plateaus in x
and in the semiclassical frequency h xi).  It is Hermitian positive
semidefinite with norm <= 1, and its significant range (spectral fraction
theta of the top) spans the states supported inside the window.

The central measurement is

    g(h) = sigma_min( (P(z, h) - z) B ),

with B an orthonormal basis of that range: the smallest residual any state
microlocalized in the window can achieve, a computable stand-in for the
inverse bounds near critical elements.  Near a critical element at level z
the h-scaling of g reproduces the predicted exponents (1 with log correction,
2m/(m+1), (4 m2 + 2)/(2 m2 + 3), and 2 for the flat families); g is fitted
over a geometric h-sweep by log-log regression, optionally with a
log log(1/h) correction term.

The range basis is computed without dense n x n algebra: with
G = diag(sqrt psi) F M_chi one has Phi = G* G, and G G* is a small Hermitian
Toeplitz-like matrix indexed by the active frequencies, so the basis costs
O(K^2 n) for K active modes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .classify import CriticalElement, NONDEG_MAX, GLOBAL_CYLINDER
from .geometry import EffectivePotential
from .spectral import DiscreteOperator, Grid, discretize

_DEFAULT_TAPER = 0.25
_DEFAULT_THETA = 0.5


class WindowError(ValueError):
    """Phase-space window not resolvable or with empty significant range."""


@dataclass(frozen=True)
class PhaseSpaceWindow:
    """Rectangle in (x, h xi) with cosine-tapered edges.

    The plateau occupies a (1 - taper) fraction of each halfwidth; the taper
    rolls smoothly to zero at the stated halfwidth.
    """
    x_center: float
    x_halfwidth: float
    xi_center: float = 0.0
    xi_halfwidth: float = 0.5
    taper: float = _DEFAULT_TAPER

    def covers_circle(self, period: float) -> bool:
        return self.x_halfwidth >= period / 2.0


def full_phase_space(grid: Grid, h: float) -> PhaseSpaceWindow:
    """A window whose cutoffs are identically 1 (chi = psi = 1)."""
    xi_max = float(np.max(np.abs(h * grid.wavenumbers)))
    return PhaseSpaceWindow(x_center=0.0, x_halfwidth=grid.period,
                            xi_center=0.0, xi_halfwidth=4.0 * xi_max, taper=0.0)


def _taper_profile(d: np.ndarray, halfwidth: float, taper: float) -> np.ndarray:
    d = np.abs(d)
    flat = halfwidth * (1.0 - taper)
    out = np.zeros_like(d)
    out[d <= flat] = 1.0
    ramp = (d > flat) & (d < halfwidth)
    if taper > 0:
        out[ramp] = np.cos(0.5 * np.pi * (d[ramp] - flat) / (halfwidth - flat)) ** 2
    return out


@dataclass
class CompressionOperator:
    """Phi = M_chi F* M_psi F M_chi at scale h on a fixed grid."""
    grid: Grid
    h: float
    chi: np.ndarray
    psi: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        one_d = v.ndim == 1
        if one_d:
            v = v[:, None]
        out = self.chi[:, None] * np.fft.ifft(
            self.psi[:, None] * np.fft.fft(self.chi[:, None] * v, axis=0), axis=0)
        return out[:, 0] if one_d else out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense form, for small grids and cross-checks."""
        return self.apply(np.eye(self.grid.n, dtype=complex))

    def range_basis(self, theta: float = _DEFAULT_THETA):
        """Orthonormal basis of the significant range of Phi.

        Returns (B, sigma) where sigma are all singular values of Phi
        (descending) and B holds the singular vectors with sigma >= theta *
        sigma_max as columns."""
        n = self.grid.n
        K = np.nonzero(self.psi > 0)[0]
        if len(K) == 0:
            raise WindowError("frequency window contains no modes")
        T = np.fft.fft(self.chi * self.chi) / n
        sq = np.sqrt(self.psi[K])
        M = (sq[:, None] * sq[None, :]) * T[(K[:, None] - K[None, :]) % n]
        w, U = np.linalg.eigh(M)
        w = np.maximum(w[::-1], 0.0)
        U = U[:, ::-1]
        if w[0] <= 0:
            raise WindowError("compression has numerically empty range")
        keep = w >= theta * w[0]
        r = int(np.sum(keep))
        s = np.sqrt(w[:r])
        full = np.zeros((n, r), dtype=complex)
        full[K, :] = sq[:, None] * U[:, :r]
        B = self.chi[:, None] * (np.fft.ifft(full, axis=0) * math.sqrt(n)) / s[None, :]
        return B, w


def build_compression(window: PhaseSpaceWindow, grid: Grid, h: float) -> CompressionOperator:
    """Materialize the window's cutoff pair on the grid at scale h."""
    if h <= 0:
        raise ValueError("h must be positive")
    dxi = h * 2.0 * np.pi / grid.period  # spacing of the discrete h xi lattice
    if not window.covers_circle(grid.period) and window.x_halfwidth <= 4.0 * grid.spacing:
        raise WindowError(f"x halfwidth {window.x_halfwidth} under 4 grid cells")
    if window.xi_halfwidth <= 4.0 * dxi:
        raise WindowError(f"xi halfwidth {window.xi_halfwidth} under 4 frequency cells "
                          f"(h xi spacing {dxi})")
    if window.covers_circle(grid.period):
        chi = np.ones(grid.n)
    else:
        d = (grid.nodes - window.x_center + grid.period / 2) % grid.period - grid.period / 2
        chi = _taper_profile(d, window.x_halfwidth, window.taper)
    psi = _taper_profile(h * grid.wavenumbers - window.xi_center,
                         window.xi_halfwidth, window.taper)
    return CompressionOperator(grid=grid, h=h, chi=chi, psi=psi)


# ---------------------------------------------------------------------------
# restricted smallest singular value and its h-sweep


def restricted_sigma_min(pot: EffectivePotential, z: float, h: float, grid: Grid,
                         window: PhaseSpaceWindow, scheme: str = "spectral",
                         range_threshold: float = _DEFAULT_THETA,
                         op: Optional[DiscreteOperator] = None) -> float:
    """sigma_min((P - z) B) over the window's significant range basis B."""
    comp = build_compression(window, grid, h)
    B, _ = comp.range_basis(range_threshold)
    if B.shape[1] == 0:
        raise WindowError("significant range of the compression is empty")
    if op is None:
        op = discretize(pot, h, grid, scheme)
    R = op.apply(B) - z * B
    return float(np.linalg.svd(R, compute_uv=False)[-1])


def default_window(elem: CriticalElement, pot: EffectivePotential,
                   xi_halfwidth: float = 0.5, x_margin: Optional[float] = None,
                   taper: float = _DEFAULT_TAPER) -> PhaseSpaceWindow:
    """Window centered on a critical element.

    The x-margin beyond the element must dominate the width of the states it
    hosts: a nondegenerate max concentrates at scale sqrt(h log(1/h)) and is
    well served by 0.5, while degenerate and flat elements spread like
    h^{1/(m+1)} and need a wider plateau before the asymptotic rate shows.
    The margin is capped so the window stays clear of the antipode of the
    element center.
    """
    if x_margin is None:
        x_margin = 0.5 if elem.taxonomy == NONDEG_MAX else 1.5
    if elem.taxonomy == GLOBAL_CYLINDER:
        # a proper sub-window: on a globally flat circle any full cover makes
        # the constant an exact null vector of P(z) at the critical level
        return PhaseSpaceWindow(x_center=0.0, x_halfwidth=min(1.5, pot.period / 4.0),
                                xi_center=0.0, xi_halfwidth=xi_halfwidth, taper=taper)
    halfwidth = 0.5 * elem.width + x_margin
    halfwidth = min(halfwidth, 0.45 * pot.period)
    return PhaseSpaceWindow(x_center=elem.center % pot.period, x_halfwidth=halfwidth,
                            xi_center=0.0, xi_halfwidth=xi_halfwidth, taper=taper)


def default_h_sweep(h_max: float = 1.0 / 50.0, h_min: float = 1.0 / 800.0,
                    per_octave: int = 2) -> np.ndarray:
    """Geometric sweep from h_max down to (at least) h_min."""
    count = int(math.ceil(per_octave * math.log2(h_max / h_min))) + 1
    hs = h_max * 2.0 ** (-np.arange(count) / per_octave)
    return hs


def grid_for_h(h: float, period: float, n_min: int = 1024, n_max: int = 4096) -> Grid:
    """Refine n with 1/h (64 points per unit of 1/h), clipped to [n_min, n_max].

    The cap keeps dense algebra at desk scale; the spectral scheme retains a
    Nyquist margin at the smallest h of the default sweep."""
    want = 64.0 / h
    n = 2 ** int(math.ceil(math.log2(max(want, n_min))))
    return Grid(n=min(max(n, n_min), n_max), period=period)


@dataclass
class RateFit:
    """Fitted h-scaling g ~ C h^alpha (log 1/h)^{-gamma}."""
    exponent: float
    log_gamma: float
    intercept: float
    residual_rms: float
    h_list: Tuple[float, ...]
    g_list: Tuple[float, ...]
    n_list: Tuple[int, ...]
    model: str                  # "pure-power" | "log-corrected"
    reliable: bool = True


def fit_rate(hs: Sequence[float], gs: Sequence[float], model: str = "pure-power",
             n_list: Optional[Sequence[int]] = None) -> RateFit:
    """Least-squares fit of log g against log h (+ optional -log log(1/h))."""
    hs = np.asarray(hs, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if len(hs) < 5 or np.max(hs) / np.min(hs) < 8.0:
        raise ValueError("rate fits need >= 5 h-values spanning a factor >= 8")
    if np.any(gs <= 0):
        raise ValueError("gap values must be positive for a log-log fit")
    X = np.log(hs)
    Y = np.log(gs)
    cols = [np.ones_like(X), X]
    if model == "log-corrected":
        cols.append(-np.log(np.log(1.0 / hs)))
    elif model != "pure-power":
        raise ValueError(f"unknown rate model {model!r}")
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
    rms = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
    # decreasing h should not increase g beyond noise
    order = np.argsort(hs)[::-1]
    gs_sorted = gs[order]
    reliable = bool(np.all(gs_sorted[1:] <= 1.25 * gs_sorted[:-1]))
    return RateFit(exponent=float(coef[1]),
                   log_gamma=float(coef[2]) if model == "log-corrected" else 0.0,
                   intercept=float(coef[0]), residual_rms=rms,
                   h_list=tuple(float(v) for v in hs), g_list=tuple(float(v) for v in gs),
                   n_list=tuple(int(v) for v in (n_list if n_list is not None else [0] * len(hs))),
                   model=model, reliable=reliable)


def gap_rate_fit(pot: EffectivePotential, elem: CriticalElement,
                 z: Optional[float] = None, h_sequence: Optional[Sequence[float]] = None,
                 window: Optional[PhaseSpaceWindow] = None, scheme: str = "spectral",
                 model: str = "pure-power", xi_halfwidth: float = 0.5,
                 x_margin: Optional[float] = None,
                 range_threshold: float = _DEFAULT_THETA,
                 n_min: int = 1024, n_max: int = 4096):
    """Sweep g(h) near a critical element and fit its scaling exponent.

    z defaults to the element's critical level (the hardest point of the
    admissible energy window).  Returns (RateFit, gs, ns)."""
    z = elem.level if z is None else z
    hs = default_h_sweep() if h_sequence is None else np.asarray(h_sequence, dtype=float)
    window = window or default_window(elem, pot, xi_halfwidth=xi_halfwidth, x_margin=x_margin)
    gs, ns = [], []
    for h in hs:
        grid = grid_for_h(h, pot.period, n_min=n_min, n_max=n_max)
        gs.append(restricted_sigma_min(pot, z, float(h), grid, window, scheme=scheme,
                                       range_threshold=range_threshold))
        ns.append(grid.n)
    return fit_rate(hs, gs, model=model, n_list=ns)


# ---------------------------------------------------------------------------
# mode-side diagnostics


def psi_partition_class(mode, a0: float, a1: float) -> str:
    """psi0 if eta^2 <= A0^2/2, psi2 if eta^2 >= 2 A1^2, else psi1."""
    eta2 = mode.eta * mode.eta
    if eta2 <= 0.5 * a0 * a0:
        return "psi0"
    if eta2 >= 2.0 * a1 * a1:
        return "psi2"
    return "psi1"


def fourier_spread(coefficients: Sequence[Tuple[int, complex]], threshold: float) -> int:
    """Number of theta-modes carrying at least the given relative mass.

    coefficients: (k, c_k) for a combination sum_k c_k e^{ik theta} phi_k with
    each phi_k unit-normalized; distinct k-sectors are exactly orthogonal, so
    the total mass is sum |c_k|^2.
    """
    weights = np.array([abs(c) ** 2 for _, c in coefficients], dtype=float)
    total = float(np.sum(weights))
    if total == 0.0:
        return 0
    return int(np.sum(weights >= threshold * total))
