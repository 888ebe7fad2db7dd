"""Discretization and eigenanalysis of the separated radial operators.

On the periodic x-circle the full operator splits over angular momenta k into

    L_k = -d^2/dx^2 + k^2 V0(x) + V1(x),

whose eigenvalues are the squared surface frequencies lambda^2, or in
semiclassical form (h = 1/|k|, z = h^2 lambda^2)

    P(z, h) = (hD)^2 + V(x) - z,   V = V0 + h^2 V1.

All schemes are circulant-plus-diagonal: second differences (fd2), the
five-point fourth-order stencil (fd4), or the exact Fourier symbol (hk)^2
(spectral).  Matrices are real symmetric; the fast path applies the circulant
part by FFT.  Joint eigenmodes e^{ik theta} phi_k(x) are tagged with the
conserved ratio eta = k/lambda and a partition class by the thresholds
eta^2 <= A0^2/2 (propagating) and eta^2 >= 2 A1^2 (elliptic).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from .geometry import EffectivePotential

SCHEMES = ("fd2", "fd4", "spectral")

_RESIDUAL_REL = 1e-8
_DEGENERATE_REL = 1e-10


class ResolutionError(ValueError):
    """Grid cannot resolve the requested scales."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with a power-of-two point count."""
    n: int
    period: float

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"grid size must be a power of two >= 64, got {self.n}")

    @property
    def spacing(self) -> float:
        return self.period / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Raw Fourier wavenumbers xi_m = 2 pi m~ / period (fftfreq order)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)


def _kinetic_symbol(grid: Grid, h: float, scheme: str) -> np.ndarray:
    """Fourier symbol of the discrete -(h d/dx)^2 for each scheme."""
    theta = 2.0 * np.pi * np.fft.fftfreq(grid.n)  # grid phase per step
    dx = grid.spacing
    if scheme == "spectral":
        return (h * grid.wavenumbers) ** 2
    if scheme == "fd2":
        return (2.0 * h * h / (dx * dx)) * (1.0 - np.cos(theta))
    if scheme == "fd4":
        return (h * h / (12.0 * dx * dx)) * (30.0 - 32.0 * np.cos(theta) + 2.0 * np.cos(2.0 * theta))
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


@dataclass
class DiscreteOperator:
    """Real symmetric discretization of (hD)^2 + V(x) (or of L_k when built
    through angular_operator, in which case h = 1/|k|)."""
    grid: Grid
    h: Optional[float]
    scheme: str
    symbol: np.ndarray          # kinetic Fourier symbol (fftfreq order)
    potential: np.ndarray       # V at the nodes
    warned: bool = False        # resolution warning from discretize
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        """Dense symmetric matrix; built on first use."""
        if self._matrix is None:
            n = self.grid.n
            c = np.real(np.fft.ifft(self.symbol))
            M = c[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]
            M = 0.5 * (M + M.T)
            M[np.arange(n), np.arange(n)] += self.potential
            self._matrix = M
        return self._matrix

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        """FFT application of the circulant part plus the diagonal."""
        v = np.asarray(vecs)
        one_d = v.ndim == 1
        if one_d:
            v = v[:, None]
        out = np.fft.ifft(self.symbol[:, None] * np.fft.fft(v, axis=0), axis=0)
        if not np.iscomplexobj(vecs):
            out = np.real(out)
        out += self.potential[:, None] * v
        return out[:, 0] if one_d else out


def points_per_wavelength(pot: EffectivePotential, h: float, grid: Grid) -> float:
    """Grid points across one local wavelength 2 pi h / sqrt(max V0)."""
    return 2.0 * np.pi * h / (math.sqrt(pot.v0_range[1]) * grid.spacing)


def discretize(pot: EffectivePotential, h: float, grid: Grid,
               scheme: str = "spectral") -> DiscreteOperator:
    """Symmetric matrix of (hD)^2 + V0 + h^2 V1 on the grid."""
    if h <= 0:
        raise ValueError("h must be positive")
    x = grid.nodes
    V = np.asarray(pot.v0(x), dtype=float) + h * h * np.asarray(pot.v1(x), dtype=float)
    warned = points_per_wavelength(pot, h, grid) < 8.0
    return DiscreteOperator(grid=grid, h=h, scheme=scheme,
                            symbol=_kinetic_symbol(grid, h, scheme),
                            potential=V, warned=warned)


def angular_operator(pot: EffectivePotential, k: int, grid: Grid,
                     scheme: str = "spectral") -> DiscreteOperator:
    """Unscaled separated operator L_k = -d^2/dx^2 + k^2 V0 + V1."""
    x = grid.nodes
    V = (k * k) * np.asarray(pot.v0(x), dtype=float) + np.asarray(pot.v1(x), dtype=float)
    return DiscreteOperator(grid=grid, h=(1.0 / abs(k) if k != 0 else None),
                            scheme=scheme, symbol=_kinetic_symbol(grid, 1.0, scheme),
                            potential=V)


def eigen_window(op: DiscreteOperator, window=None):
    """All eigenpairs with eigenvalue in [z_lo, z_hi] (whole spectrum if None).

    Returns (E, vecs, residuals) sorted by eigenvalue, each eigenvector with
    a deterministic sign (first significant component positive).
    """
    E, U = np.linalg.eigh(op.matrix)
    if window is not None:
        z_lo, z_hi = window
        sel = (E >= z_lo) & (E <= z_hi)
        E, U = E[sel], U[:, sel]
    scale = float(np.max(np.abs(E))) if len(E) else 1.0
    for j in range(U.shape[1]):
        col = U[:, j]
        i = int(np.argmax(np.abs(col) > 1e-8)) if np.any(np.abs(col) > 1e-8) else 0
        if col[i] < 0:
            U[:, j] = -col
    res = np.linalg.norm(op.apply(U) - U * E[None, :], axis=0) if len(E) else np.array([])
    return E, U, res


def _traveling_pairs(E: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Rotate exactly degenerate eigenpairs to traveling-wave combinations.

    Real symmetric solvers return arbitrary real bases inside degenerate
    eigenspaces; the canonical complex combinations (v1 +- i v2)/sqrt(2) make
    |phi| constant for symbol-degenerate pairs (e.g. the flat circle) and are
    deterministic for every input."""
    phis = U.astype(complex)
    scale = max(float(np.max(np.abs(E))), 1.0) if len(E) else 1.0
    i = 0
    while i < len(E):
        j = i + 1
        while j < len(E) and abs(E[j] - E[i]) <= _DEGENERATE_REL * scale:
            j += 1
        if j - i == 2:
            v1, v2 = U[:, i], U[:, i + 1]
            phis[:, i] = (v1 + 1j * v2) / math.sqrt(2.0)
            phis[:, i + 1] = (v1 - 1j * v2) / math.sqrt(2.0)
        i = j
    return phis


@dataclass
class SurfaceMode:
    """Joint eigenfunction e^{ik theta} phi_k(x) of the conjugated Laplacian."""
    k: int
    lambda_sq: float
    phi: np.ndarray            # unit L2 norm in the discrete flat measure
    residual: float
    eta: float                 # k / lambda (0 for the constant mode)
    psi_class: str             # psi0 | psi1 | psi2
    grid: Grid

    @property
    def lam(self) -> float:
        return math.sqrt(max(self.lambda_sq, 0.0))


def _classify_eta(eta: float, a0: float, a1: float) -> str:
    if eta * eta <= 0.5 * a0 * a0:
        return "psi0"
    if eta * eta >= 2.0 * a1 * a1:
        return "psi2"
    return "psi1"


def modes_for_k(pot: EffectivePotential, k: int, grid: Grid, scheme: str = "spectral",
                lambda_max: Optional[float] = None, window=None) -> List[SurfaceMode]:
    """Eigenmodes of L_k as SurfaceModes (k >= 0; mirror with mirror_mode)."""
    op = angular_operator(pot, k, grid, scheme)
    lim = None if lambda_max is None else lambda_max ** 2
    E, U, _ = eigen_window(op, window if window is not None else
                           (None if lim is None else (-np.inf, lim)))
    phis = _traveling_pairs(E, U)
    dx = grid.spacing
    phis = phis / np.sqrt(np.sum(np.abs(phis) ** 2, axis=0) * dx)[None, :]
    out = []
    for j, e in enumerate(E):
        phi = phis[:, j]
        res = float(np.linalg.norm(op.apply(phi) - e * phi) * math.sqrt(dx))
        lam_sq = float(e)
        if lam_sq > 1e-8:
            if res > _RESIDUAL_REL * lam_sq:
                continue  # not accepted at the residual contract
            eta = k / math.sqrt(lam_sq)
        else:
            if res > _RESIDUAL_REL:
                continue
            eta = 0.0
        out.append(SurfaceMode(k=k, lambda_sq=lam_sq, phi=phi, residual=res, eta=eta,
                               psi_class=_classify_eta(eta, pot.a_min, pot.a_max),
                               grid=grid))
    return out


def mirror_mode(mode: SurfaceMode) -> SurfaceMode:
    """The angular mirror k -> -k (conjugate radial part)."""
    return SurfaceMode(k=-mode.k, lambda_sq=mode.lambda_sq, phi=np.conj(mode.phi),
                       residual=mode.residual, eta=-mode.eta, psi_class=mode.psi_class,
                       grid=mode.grid)


def surface_spectrum(pot: EffectivePotential, k_max: int, lambda_max: float,
                     grid: Grid, scheme: str = "spectral") -> List[SurfaceMode]:
    """All joint eigenmodes with |k| <= k_max and lambda <= lambda_max,
    in deterministic (k, lambda) order."""
    modes: List[SurfaceMode] = []
    for k in range(0, k_max + 1):
        batch = modes_for_k(pot, k, grid, scheme, lambda_max=lambda_max)
        modes.extend(batch)
        if k > 0:
            modes.extend(mirror_mode(m) for m in batch)
    modes.sort(key=lambda m: (m.lambda_sq, m.k))
    return modes


def weyl_count_estimate(pot: EffectivePotential, lam_sq: float, n: int = 4096) -> float:
    """Area/(4 pi) * Lambda with Area = 2 pi * integral of A dx."""
    if pot.curve is None:
        raise ValueError("weyl_count_estimate needs the generating curve")
    x = np.arange(n) * (pot.period / n)
    area = 2.0 * np.pi * float(np.sum(pot.curve.A(x)) * (pot.period / n))
    return area / (4.0 * np.pi) * lam_sq
