"""Periodic generating curves A(x) for surfaces of revolution.

The surface carries the metric ds^2 = dx^2 + A^2(x) dtheta^2 with A smooth,
periodic and bounded below by a positive floor.  Everything downstream is
driven by the principal potential V0 = A^{-2}, so the catalog is organized by
the local normal form of V0 at its critical set:

    flat            V0 == 1 (global cylinder)
    nondeg          A = 2 + cos x: nondegenerate max of V0 at x = pi
    power-max(m)    V0 = 1 - (3/4) sin^{2m}(x/2): max of vanishing order 2m
    inflection(m2)  V0 = 1/2 - (1/4) sin^{2m2+1}(x): odd flat inflection
    cylinder(a, p)  V0 == 1 on [-a, a], exp(-1/t^p) shoulders
    gevrey-flat(p)  isolated infinitely degenerate max, exp(-1/|x|^p) flat

The flat-sided profiles are built from one-sided bumps exp(-1/t^p), the model
members of the 0-Gevrey classes, joined as a product of a left and a right
shoulder so that V0 is smooth on the whole circle and the distance-to-flat-set
asymptotics stay clean for endpoint recovery.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

TWO_PI = 2.0 * math.pi

_VALIDATION_N = 2 ** 14
_FLOOR_N = 2 ** 16
_FLOOR_MARGIN = 1e-9

CATALOG_NAMES = ("flat", "nondeg", "power-max", "inflection", "cylinder", "gevrey-flat")


class ProfileError(ValueError):
    """Invalid profile construction or validation failure."""


@dataclass(frozen=True)
class GeneratingCurve:
    """A periodic positive profile with first and second derivatives.

    Immutable after construction; safe to share across parallel sweeps.
    """
    period: float
    A: Callable[[np.ndarray], np.ndarray]
    dA: Callable[[np.ndarray], np.ndarray]
    ddA: Callable[[np.ndarray], np.ndarray]
    kind: str
    epsilon_floor: float
    name: Optional[str] = None
    params: dict = field(default_factory=dict)

    def sample(self, n: int):
        x = np.arange(n) * (self.period / n)
        return x, self.A(x), self.dA(x), self.ddA(x)

    def validate(self, n: int = _VALIDATION_N, deriv_rel_tol: float = 1e-6) -> None:
        """Check positivity, periodicity and derivative consistency."""
        x, a, da, dda = self.sample(n)
        if np.min(a) < self.epsilon_floor:
            j = int(np.argmin(a))
            raise ProfileError(f"A(x) = {a[j]} below floor {self.epsilon_floor} at x = {x[j]}")
        per = np.max(np.abs(self.A(x) - self.A(x + self.period)))
        if per > 1e-12 * np.max(a):
            raise ProfileError(f"periodicity violated: max |A(x) - A(x+T)| = {per}")
        if self.kind == "closed-form":
            h = self.period / n
            fd1 = (self.A(x + h) - self.A(x - h)) / (2 * h)
            fd2 = (self.A(x + h) - 2 * a + self.A(x - h)) / (h * h)
            s1 = np.max(np.abs(da)) + 1.0
            s2 = np.max(np.abs(dda)) + 1.0
            # centered differences are O(h^2); tolerance covers the scheme error
            if np.max(np.abs(fd1 - da)) > max(deriv_rel_tol * s1, 10 * h * h * s2):
                raise ProfileError("A' inconsistent with centered differences of A")
            if np.max(np.abs(fd2 - dda)) > max(deriv_rel_tol * s2, 100 * h * s2):
                raise ProfileError("A'' inconsistent with centered differences of A")

    # -- serialization ----------------------------------------------------

    def to_spec_text(self) -> str:
        if self.name is None:
            raise ProfileError("only catalog profiles serialize to a text spec")
        lines = [f"name={self.name}"]
        for key, val in sorted(self.params.items()):
            lines.append(f"param.{key}={val!r}")
        lines.append(f"period={self.period!r}")
        return "\n".join(lines) + "\n"

    def to_csv(self, n: int = 2048) -> str:
        x, a, da, dda = self.sample(n)
        rows = ["x,A,A1,A2"]
        rows += [f"{xi!r},{ai!r},{d1!r},{d2!r}" for xi, ai, d1, d2 in zip(x, a, da, dda)]
        return "\n".join(rows) + "\n"


def curve_from_spec_text(text: str) -> GeneratingCurve:
    import ast

    name, params = None, {}
    for line in text.strip().splitlines():
        key, _, val = line.partition("=")
        if key == "name":
            name = val
        elif key.startswith("param."):
            params[key[len("param."):]] = ast.literal_eval(val)
        elif key == "period":
            pass  # catalog profiles fix their own period
    if name is None:
        raise ProfileError("profile spec missing name")
    return catalog_profile(name, **params)


def parse_profile_tag(tag: str):
    """Parse tags like 'power-max(2)' or 'cylinder(0.5, 2)' into (name, params)."""
    m = re.fullmatch(r"\s*([a-z-]+)\s*(?:\(([^)]*)\))?\s*", tag)
    if not m:
        raise ProfileError(f"unparseable profile tag: {tag!r}")
    name = m.group(1)
    raw = [s.strip() for s in (m.group(2) or "").split(",") if s.strip()]
    keys = {"power-max": ["m"], "inflection": ["m2"], "cylinder": ["a", "p"], "gevrey-flat": ["p"]}
    if name not in CATALOG_NAMES:
        raise ProfileError(f"unknown catalog profile: {name!r}")
    want = keys.get(name, [])
    if len(raw) != len(want):
        raise ProfileError(f"{name} takes {len(want)} parameter(s), got {len(raw)}")
    params = {}
    for key, val in zip(want, raw):
        params[key] = int(val) if re.fullmatch(r"[+-]?\d+", val) else float(val)
    return name, params


# -- curve construction from a principal potential -------------------------

def _chain_from_v0(v0, v0p, v0pp):
    """A = v0^{-1/2} and its derivatives by the chain rule."""
    def A(x):
        return v0(x) ** -0.5

    def dA(x):
        return -0.5 * v0(x) ** -1.5 * v0p(x)

    def ddA(x):
        v = v0(x)
        return 0.75 * v ** -2.5 * v0p(x) ** 2 - 0.5 * v ** -1.5 * v0pp(x)

    return A, dA, ddA


def _epsilon_floor(A, period, n=_FLOOR_N):
    x = np.arange(n) * (period / n)
    return float(np.min(A(x))) - _FLOOR_MARGIN


def construct_from_v0(v0, v0p=None, v0pp=None, period: float = TWO_PI,
                      kind: str = "closed-form", name=None, params=None,
                      samples: int = _VALIDATION_N) -> GeneratingCurve:
    """Invert V0 = A^{-2}.  Derivatives are taken from the supplied closed
    forms, or by spectral (FFT) differentiation of sampled values."""
    x = np.arange(samples) * (period / samples)
    vx = np.asarray(v0(x), dtype=float)
    if np.any(vx <= 0):
        j = int(np.argmin(vx))
        raise ProfileError(f"v0 must be positive; v0({x[j]}) = {vx[j]}")
    wrap = np.abs(np.asarray(v0(x[:8] + period)) - vx[:8])
    if np.max(wrap) > 1e-9 * np.max(np.abs(vx)):
        raise ProfileError("v0 is not periodic with the stated period")
    if v0p is None or v0pp is None:
        v0p, v0pp = _spectral_derivatives(vx, period)
    A, dA, ddA = _chain_from_v0(v0, v0p, v0pp)
    return GeneratingCurve(period=period, A=A, dA=dA, ddA=ddA, kind=kind,
                           epsilon_floor=_epsilon_floor(A, period),
                           name=name, params=dict(params or {}))


def _spectral_derivatives(values: np.ndarray, period: float):
    """Trig-series derivatives of uniformly sampled periodic data, evaluated
    anywhere through periodic cubic splines of the differentiated samples."""
    from scipy.interpolate import CubicSpline

    n = len(values)
    k = 2 * np.pi * np.fft.fftfreq(n, d=period / n)
    fhat = np.fft.fft(values)
    d1 = np.real(np.fft.ifft(1j * k * fhat))
    d2 = np.real(np.fft.ifft(-(k * k) * fhat))
    xs = np.arange(n + 1) * (period / n)
    sp1 = CubicSpline(xs, np.append(d1, d1[0]), bc_type="periodic")
    sp2 = CubicSpline(xs, np.append(d2, d2[0]), bc_type="periodic")

    def v0p(x):
        return sp1(np.asarray(x) % period)

    def v0pp(x):
        return sp2(np.asarray(x) % period)

    return v0p, v0pp


# -- 0-Gevrey building blocks ----------------------------------------------

def bump(t, p, mu: float = 1.0):
    """One-sided flat model: exp(-mu/t^p) for t > 0, identically 0 for t <= 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-mu * t[pos] ** -p)
    return out


def bump_d1(t, p, mu: float = 1.0):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = (mu * p * tp ** -(p + 1)) * np.exp(-mu * tp ** -p)
    return out


def bump_d2(t, p, mu: float = 1.0):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    q = mu * p * tp ** -(p + 1)
    out[pos] = (q * q - mu * p * (p + 1) * tp ** -(p + 2)) * np.exp(-mu * tp ** -p)
    return out


def _flat_topped_v0(a: float, p: float, mu: float = 1.0, period: float = TWO_PI):
    """V0 = 1 on [-a, a] (a point when a = 0), falling through exp(-mu/t^p)
    shoulders to a smooth minimum of 1/4 at the antipode."""
    half = period / 2.0
    smax = float(bump(half - a, p, mu) * bump(period - a - half, p, mu))
    c = 0.75 / smax

    def wrap(x):
        return (np.asarray(x, dtype=float) + half) % period - half

    def parts(x):
        y = wrap(x)
        s = np.sign(y)
        ya = np.abs(y)
        t1 = ya - a
        t2 = period - a - ya
        return s, t1, t2

    def v0(x):
        _, t1, t2 = parts(x)
        return 1.0 - c * bump(t1, p, mu) * bump(t2, p, mu)

    def v0p(x):
        s, t1, t2 = parts(x)
        g = bump_d1(t1, p, mu) * bump(t2, p, mu) - bump(t1, p, mu) * bump_d1(t2, p, mu)
        return -c * s * g

    def v0pp(x):
        _, t1, t2 = parts(x)
        g = (bump_d2(t1, p, mu) * bump(t2, p, mu)
             - 2.0 * bump_d1(t1, p, mu) * bump_d1(t2, p, mu)
             + bump(t1, p, mu) * bump_d2(t2, p, mu))
        return -c * g

    return v0, v0p, v0pp


# -- the catalog ------------------------------------------------------------

def catalog_profile(name: str, **params) -> GeneratingCurve:
    """Construct a catalog profile by name; see the module docstring for the
    realized normal forms of V0 = A^{-2}."""
    if name == "flat":
        _reject_params(name, params)
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
        return GeneratingCurve(period=TWO_PI, A=one, dA=zero, ddA=zero,
                               kind="closed-form", epsilon_floor=1.0 - _FLOOR_MARGIN,
                               name="flat", params={})

    if name == "nondeg":
        _reject_params(name, params)
        A = lambda x: 2.0 + np.cos(x)
        dA = lambda x: -np.sin(x)
        ddA = lambda x: -np.cos(x)
        return GeneratingCurve(period=TWO_PI, A=A, dA=dA, ddA=ddA,
                               kind="closed-form", epsilon_floor=1.0 - _FLOOR_MARGIN,
                               name="nondeg", params={})

    if name == "power-max":
        m = _int_param(params, "m", low=2)
        def v0(x):
            return 1.0 - 0.75 * np.sin(np.asarray(x) / 2.0) ** (2 * m)

        def v0p(x):
            u = np.asarray(x) / 2.0
            return -0.75 * m * np.sin(u) ** (2 * m - 1) * np.cos(u)

        def v0pp(x):
            u = np.asarray(x) / 2.0
            s, cc = np.sin(u), np.cos(u)
            return -(0.375 * m) * ((2 * m - 1) * s ** (2 * m - 2) * cc ** 2 - s ** (2 * m))

        return construct_from_v0(v0, v0p, v0pp, name="power-max", params={"m": m})

    if name == "inflection":
        m2 = _int_param(params, "m2", low=1)
        q = 2 * m2 + 1

        def v0(x):
            return 0.5 - 0.25 * np.sin(np.asarray(x)) ** q

        def v0p(x):
            s, cc = np.sin(np.asarray(x)), np.cos(np.asarray(x))
            return -0.25 * q * s ** (q - 1) * cc

        def v0pp(x):
            s, cc = np.sin(np.asarray(x)), np.cos(np.asarray(x))
            return -0.25 * q * ((q - 1) * s ** (q - 2) * cc ** 2 - s ** q)

        return construct_from_v0(v0, v0p, v0pp, name="inflection", params={"m2": m2})

    if name == "cylinder":
        a = float(params.pop("a", 0.5))
        p = params.pop("p", 2)
        _reject_params(name, params)
        if not 0 < a < TWO_PI / 4:
            raise ProfileError(f"cylinder half-width must lie in (0, period/4), got {a}")
        if p < 1:
            raise ProfileError(f"shoulder exponent p must be >= 1, got {p}")
        v0, v0p, v0pp = _flat_topped_v0(a, p)
        return construct_from_v0(v0, v0p, v0pp, kind="composite-with-flat-pieces",
                                 name="cylinder", params={"a": a, "p": p})

    if name == "gevrey-flat":
        p = params.pop("p", 2)
        _reject_params(name, params)
        if p < 1:
            raise ProfileError(f"flatness exponent p must be >= 1, got {p}")
        v0, v0p, v0pp = _flat_topped_v0(0.0, p)
        return construct_from_v0(v0, v0p, v0pp, kind="gevrey-flat",
                                 name="gevrey-flat", params={"p": p})

    raise ProfileError(f"unknown catalog profile: {name!r}")


def _int_param(params: dict, key: str, low: int):
    val = params.pop(key, None)
    _reject_params(key, params)
    if val is None or int(val) != val or int(val) < low:
        raise ProfileError(f"parameter {key} must be an integer >= {low}, got {val!r}")
    return int(val)


def _reject_params(name, params):
    if params:
        raise ProfileError(f"unexpected parameters for {name}: {sorted(params)}")
