"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

The fallback is selected automatically when numba is unavailable, or
explicitly by setting the environment variable REVLAB_NO_NUMBA=1 before
import.  Both paths produce the same values to floating-point roundoff;
``benchmarks/bench_kernels.py`` compares their throughput.
"""
import os

import numpy as np

USE_NUMBA = os.environ.get("REVLAB_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False

if not USE_NUMBA:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# Yoshida 4th-order composition coefficients for the leapfrog map.
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1
_YOSHIDA = (_W1, _W0, _W1)


@njit(cache=True)
def symplectic_flow(x0, xi0, eta2, cos_c, sin_c, base, dt, n_steps):
    """Integrate xdot = 2 xi, xidot = -v0'(x) eta^2 with a 4th-order
    symplectic (Yoshida-composed leapfrog) scheme.

    v0' is supplied as a real trigonometric series (cos_c, sin_c, base).
    Returns (x, xi, max |p - p0|) with p = xi^2 + v0-part recovered from the
    antiderivative series; conservation is tracked through the potential
    series itself: p uses v0(x) reconstructed by integrating the v0' series,
    so cos_c/sin_c must be the series of v0 and the force uses its derivative.
    """
    # series given for v0; force is -eta2 * v0'(x)
    w1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
    w0 = 1.0 - 2.0 * w1
    x = x0
    xi = xi0

    def v0(z):
        acc = 0.0
        for m in range(cos_c.shape[0]):
            acc += cos_c[m] * np.cos(m * base * z) + sin_c[m] * np.sin(m * base * z)
        return acc

    def dv0(z):
        acc = 0.0
        for m in range(1, cos_c.shape[0]):
            acc += m * base * (-cos_c[m] * np.sin(m * base * z) + sin_c[m] * np.cos(m * base * z))
        return acc

    p0 = xi * xi + eta2 * v0(x)
    drift = 0.0
    for _ in range(n_steps):
        for c in (w1, w0, w1):
            hdt = c * dt
            xi -= 0.5 * hdt * eta2 * dv0(x)
            x += hdt * 2.0 * xi
            xi -= 0.5 * hdt * eta2 * dv0(x)
        p = xi * xi + eta2 * v0(x)
        d = abs(p - p0)
        if d > drift:
            drift = d
    return x, xi, drift


@njit(cache=True)
def _husimi_mass_jit(phi_re, phi_im, x, period, h, sigma, centers, xis):
    """Sum of Husimi values (2 pi h)^-1 |<g_{c,xi}, phi>|^2 * dmu over a
    lattice of L2-normalized Gaussian windows; dmu handled by the caller."""
    n = x.shape[0]
    dx = period / n
    total = 0.0
    for ic in range(centers.shape[0]):
        c = centers[ic]
        # window and its discrete L2 norm
        norm2 = 0.0
        for j in range(n):
            d = x[j] - c
            d -= period * np.round(d / period)
            g = np.exp(-d * d / (2.0 * sigma * sigma))
            norm2 += g * g * dx
        inv = 1.0 / np.sqrt(norm2)
        for iq in range(xis.shape[0]):
            q = xis[iq] / h
            re = 0.0
            im = 0.0
            for j in range(n):
                d = x[j] - c
                d -= period * np.round(d / period)
                g = np.exp(-d * d / (2.0 * sigma * sigma)) * inv
                ph = q * x[j]
                cph = np.cos(ph)
                sph = np.sin(ph)
                # <g e^{i q x}, phi> = sum g e^{-iqx} phi dx
                re += g * (cph * phi_re[j] + sph * phi_im[j]) * dx
                im += g * (cph * phi_im[j] - sph * phi_re[j]) * dx
            total += (re * re + im * im) / (2.0 * np.pi * h)
    return total


def _husimi_mass_numpy(phi_re, phi_im, x, period, h, sigma, centers, xis):
    n = x.shape[0]
    dx = period / n
    phi = phi_re + 1j * phi_im
    d = x[None, :] - centers[:, None]
    d -= period * np.round(d / period)
    G = np.exp(-d * d / (2.0 * sigma * sigma))
    G /= np.sqrt(np.sum(G * G, axis=1) * dx)[:, None]
    phases = np.exp(-1j * (xis[:, None] / h) * x[None, :])  # (nxi, n)
    inner = np.einsum("cj,qj->cq", G, phases * phi[None, :]) * dx
    return float(np.sum(np.abs(inner) ** 2) / (2.0 * np.pi * h))


def husimi_mass(phi, x, period, h, sigma, centers, xis):
    """Windowed-Fourier (Husimi) mass of a mode over a phase-space lattice.

    phi: complex samples on the uniform grid x; centers/xis: lattice of window
    centers in x and semiclassical frequencies.  The caller multiplies by the
    lattice cell measure to approximate a phase-space integral.
    """
    phi = np.asarray(phi, dtype=complex)
    args = (np.ascontiguousarray(phi.real), np.ascontiguousarray(phi.imag),
            np.ascontiguousarray(x, dtype=np.float64), float(period), float(h),
            float(sigma), np.ascontiguousarray(centers, dtype=np.float64),
            np.ascontiguousarray(xis, dtype=np.float64))
    if USE_NUMBA:
        return float(_husimi_mass_jit(*args))
    return _husimi_mass_numpy(*args)


def symplectic_flow_numpy(x0, xi0, eta2, cos_c, sin_c, base, dt, n_steps):
    """Reference numpy implementation of symplectic_flow (same stepping)."""
    m = np.arange(len(cos_c))

    def v0(z):
        return float(np.sum(cos_c * np.cos(m * base * z) + sin_c * np.sin(m * base * z)))

    def dv0(z):
        return float(np.sum(m * base * (-cos_c * np.sin(m * base * z) + sin_c * np.cos(m * base * z))))

    x, xi = x0, xi0
    p0 = xi * xi + eta2 * v0(x)
    drift = 0.0
    for _ in range(n_steps):
        for c in _YOSHIDA:
            hdt = c * dt
            xi -= 0.5 * hdt * eta2 * dv0(x)
            x += hdt * 2.0 * xi
            xi -= 0.5 * hdt * eta2 * dv0(x)
        drift = max(drift, abs(xi * xi + eta2 * v0(x) - p0))
    return x, xi, drift


def flow_drift(x0, xi0, eta2, cos_c, sin_c, base, dt, n_steps):
    """Dispatch to the jitted or numpy flow integrator."""
    args = (float(x0), float(xi0), float(eta2),
            np.ascontiguousarray(cos_c, dtype=np.float64),
            np.ascontiguousarray(sin_c, dtype=np.float64),
            float(base), float(dt), int(n_steps))
    if USE_NUMBA:
        return symplectic_flow(*args)
    return symplectic_flow_numpy(*args)
