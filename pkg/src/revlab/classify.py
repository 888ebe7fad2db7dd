"""Critical elements of the principal potential V0 = A^{-2}.

A critical element is a maximal connected subset of the circle on which V0'
vanishes: an isolated critical point or a flat interval.  Elements are found
by thresholding |V0'| on a grid, refined either by bisection (isolated zeros)
or, for exponentially flat profiles, by extrapolating the shoulder asymptotics
w(x) = -log|V0'(x)| ~ mu (x - edge)^{-p}, which recovers flat-set endpoints
far below the resolution any direct threshold can reach (double precision
underflows to an exactly-flat plateau around the true edge).

The taxonomy follows the slope signs just outside the element and the
vanishing order at it:

    honest minimum (V0 rises on both outward sides)   -> WeaklyStableMin
    isolated max, order 2m                            -> NondegenerateMax (m=1)
                                                         FiniteDegenerateMax(m)
    isolated max, beyond max probed order             -> InfinitelyDegenerateMax
    isolated monotone-through, order 2 m2 + 1         -> InflectionTransmission(m2)
    flat interval at a max                            -> CylinderMax
    flat monotone-through (interval or infinitely
    flat isolated point)                              -> CylinderInflection
    V0' == 0 on the whole circle                      -> GlobalCylinder

Weakly unstable elements (everything except WeaklyStableMin) carry a
predicted scaling exponent for the microlocal gap rate: 1 with a logarithmic
correction for a nondegenerate max, 2m/(m+1) and (4 m2 + 2)/(2 m2 + 3) for
the finitely degenerate families, and 2 (with eta-slack) for the infinitely
degenerate and cylindrical families; all lie in [1, 2].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np

from .geometry import EffectivePotential

# taxonomy tags
NONDEG_MAX = "NondegenerateMax"
FINITE_DEG_MAX = "FiniteDegenerateMax"
INFLECTION = "InflectionTransmission"
INF_DEG_MAX = "InfinitelyDegenerateMax"
CYLINDER_MAX = "CylinderMax"
CYLINDER_INFLECTION = "CylinderInflection"
WEAKLY_STABLE_MIN = "WeaklyStableMin"
GLOBAL_CYLINDER = "GlobalCylinder"

WEAKLY_UNSTABLE = (NONDEG_MAX, FINITE_DEG_MAX, INFLECTION, INF_DEG_MAX,
                   CYLINDER_MAX, CYLINDER_INFLECTION, GLOBAL_CYLINDER)

_SLOPE_FLOOR = 1e-14
_EPS = np.finfo(float).eps


class ClassificationError(ValueError):
    """Critical-set structure inconsistent with the taxonomy."""


@dataclass
class CriticalElement:
    """A maximal critical interval [alpha, beta] (alpha = beta if isolated)."""
    alpha: float
    beta: float
    level: float
    side_signs: Tuple[int, int]
    taxonomy: Optional[str] = None
    order: Optional[int] = None          # m or m2, depending on taxonomy
    infinite_order: bool = False
    exp_flat: bool = False               # detected exponentially flat zone
    shoulder_p: Optional[float] = None   # fitted flatness exponent, if any

    @property
    def interval(self):
        return (self.alpha, self.beta)

    @property
    def width(self):
        return self.beta - self.alpha

    @property
    def is_isolated(self):
        return self.width == 0.0

    @property
    def center(self):
        return 0.5 * (self.alpha + self.beta)


@dataclass(frozen=True)
class CriticalValueSet:
    values: Tuple[float, ...]
    components_per_value: Tuple[int, ...]
    finite: bool


@dataclass(frozen=True)
class OrderInfo:
    """Result of vanishing-order probing at a critical point."""
    k: Optional[int]              # smallest derivative order with nonzero value
    derivative: Optional[float]   # its estimated value
    infinite: bool                # nothing found up to 2 * max_order


@dataclass(frozen=True)
class PredictedRate:
    alpha: Fraction
    log_corrected: bool
    eta_slack: bool


# ---------------------------------------------------------------------------
# locating critical intervals


def find_critical_intervals(pot: EffectivePotential, grid_size: int = 4096,
                            tol: float = 1e-8, cap: int = 64):
    """Maximal intervals with |V0'| <= tol * max|V0'|, refined; plus the set
    of distinct critical values (clustered within tol * range of V0)."""
    if grid_size < 2 ** 12:
        raise ValueError("grid_size must be at least 2^12")
    if not 0 < tol < 1e-3:
        raise ValueError("tol must lie in (0, 1e-3)")
    n = int(grid_size)
    L = pot.period
    dx = L / n
    x = np.arange(n) * dx
    slope = np.asarray(pot.v0p(x), dtype=float)
    v0x = np.asarray(pot.v0(x), dtype=float)
    max_slope = float(np.max(np.abs(slope)))
    rng = float(np.max(v0x) - np.min(v0x))

    if max_slope < _SLOPE_FLOOR:
        elem = CriticalElement(alpha=0.0, beta=L, level=float(v0x[0]),
                               side_signs=(0, 0), taxonomy=GLOBAL_CYLINDER,
                               infinite_order=True)
        return [elem], CriticalValueSet((elem.level,), (1,), True)

    mask = np.abs(slope) <= tol * max_slope
    runs = _wrapped_runs(mask)
    if runs is None:  # everything below threshold
        elem = CriticalElement(alpha=0.0, beta=L, level=float(v0x[0]),
                               side_signs=(0, 0), taxonomy=GLOBAL_CYLINDER,
                               infinite_order=True)
        return [elem], CriticalValueSet((elem.level,), (1,), True)

    stubs = []
    for i0, count in runs:
        stub = _refine_run(pot, x[i0], count, dx, tol, max_slope)
        stubs.append(stub)
    stubs.sort(key=lambda e: e.alpha)

    finite = len(stubs) <= cap
    levels = sorted(e.level for e in stubs)
    values, counts = [], []
    for lv in levels:
        if values and abs(lv - values[-1][-1]) <= tol * max(rng, abs(lv), 1e-300):
            values[-1].append(lv)
            counts[-1] += 1
        else:
            values.append([lv])
            counts.append(1)
    cvs = CriticalValueSet(tuple(float(np.mean(v)) for v in values), tuple(counts), finite)
    return stubs, cvs


def _wrapped_runs(mask: np.ndarray):
    """Circular runs of True as (start_index, length); None if all True."""
    n = len(mask)
    if mask.all():
        return None
    if not mask.any():
        return []
    # rotate so position 0 is False, then find plain runs
    off = int(np.argmin(mask))
    rolled = np.roll(mask, -off)
    runs = []
    i = 0
    while i < n:
        if rolled[i]:
            j = i
            while j < n and rolled[j]:
                j += 1
            runs.append(((i + off) % n, j - i))
            i = j
        else:
            i += 1
    return runs


def _refine_run(pot, x_lo, count, dx, tol, max_slope) -> CriticalElement:
    """Turn one sub-threshold run into a refined critical element stub."""
    x_hi = x_lo + (count - 1) * dx
    lo, hi = x_lo - dx, x_hi + dx  # bracket strictly containing the zero set

    core = _bitwise_flat_core(pot, lo, hi, n_fine=max(64, 8 * (count + 2)))
    if core is not None:
        # the underflow plateau extends beyond the true endpoints, so the
        # endpoint search must start from the plateau midpoint
        mid = 0.5 * (core[0] + core[1])
        alpha, p_l = _refine_flat_edge(pot, mid, lo - 4 * dx)
        beta, p_r = _refine_flat_edge(pot, mid, hi + 4 * dx)
        if alpha is None:
            alpha, p_l = core[0], None
        if beta is None:
            beta, p_r = core[1], None
        if beta - alpha <= 4 * dx:  # isolated infinitely flat point
            alpha = beta = 0.5 * (alpha + beta)
        alpha, beta = _normalize_interval(alpha, beta, pot.period)
        p_fit = p_r if p_r is not None else p_l
        level = float(pot.v0(0.5 * (alpha + beta)))
        elem = CriticalElement(alpha=alpha, beta=beta, level=level,
                               side_signs=_side_signs(pot, alpha, beta, dx, tol, max_slope),
                               exp_flat=True, shoulder_p=p_fit)
        return elem

    x_star = _refine_isolated(pot, lo, hi)
    x_star, _ = _normalize_interval(x_star, x_star, pot.period)
    level = float(pot.v0(x_star))
    return CriticalElement(alpha=x_star, beta=x_star, level=level,
                           side_signs=_side_signs(pot, x_star, x_star, dx, tol, max_slope))


def _normalize_interval(alpha, beta, period):
    """Map the interval center into [0, period), wrapping so beta <= period."""
    w = beta - alpha
    c = (0.5 * (alpha + beta)) % period
    if c + 0.5 * w > period:
        c -= period
    return c - 0.5 * w, c + 0.5 * w


def _bitwise_flat_core(pot, lo, hi, n_fine: int = 64):
    """Widest stretch where V0' underflows to exactly 0, or None.

    A run of at least 3 consecutive exact zeros distinguishes an
    exponentially flat zone from a simple root that happens to sit on a node.
    """
    xs = np.linspace(lo, hi, n_fine)
    zero = np.asarray(pot.v0p(xs)) == 0.0
    best = cur = 0
    best_span = None
    start = 0
    for i, z in enumerate(zero):
        if z:
            if cur == 0:
                start = i
            cur += 1
            if cur > best:
                best = cur
                best_span = (xs[start], xs[i])
        else:
            cur = 0
    if best >= 3:
        return best_span
    return None


def _refine_flat_edge(pot, x_flat, x_out, w_lo=40.0, w_hi=280.0, npts=48):
    """Extrapolate a flat-set endpoint from the shoulder of |V0'|.

    Between the underflowed plateau at x_flat and the resolved region at
    x_out, fit w(x) = -log|V0'| = mu t^{-p} + q log t + c0 with t the distance
    to the endpoint; returns (endpoint, fitted p) or (None, None).
    """
    sgn = 1.0 if x_out > x_flat else -1.0

    def wval(xx):
        d = abs(float(pot.v0p(xx)))
        return math.inf if d == 0.0 else -math.log(d)

    if not np.isfinite(wval(x_out)) or math.isfinite(wval(x_flat)):
        return None, None

    def bisect_w(target):
        a, b = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (a + b)
            if wval(x_flat + mid * (x_out - x_flat)) > target:
                a = mid
            else:
                b = mid
        return x_flat + b * (x_out - x_flat)

    x_deep = bisect_w(w_hi)
    x_shal = bisect_w(w_lo)
    xs = np.linspace(x_deep, x_shal, npts)
    ws = np.array([wval(xx) for xx in xs])
    good = np.isfinite(ws)
    xs, ws = xs[good], ws[good]
    if len(xs) < 12:
        return None, None

    ones = np.ones_like(xs)

    def resid(ahat, pp):
        t = sgn * (xs - ahat)
        if t.min() <= 0:
            return math.inf
        X = np.column_stack([t ** (-pp), np.log(t), ones])
        coef, *_ = np.linalg.lstsq(X, ws, rcond=None)
        r = X @ coef - ws
        return float(np.sqrt(np.mean(r * r)))

    lo_a, hi_a = sorted((x_flat, x_deep))

    def golden(pp, iters=80):
        g = (math.sqrt(5) - 1) / 2
        a, b = lo_a, hi_a
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = resid(c, pp), resid(d, pp)
        for _ in range(iters):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = resid(c, pp)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = resid(d, pp)
        mid = 0.5 * (a + b)
        return mid, resid(mid, pp)

    best = (math.inf, None, None)
    for pp in np.geomspace(0.6, 5.0, 20):
        ah, r = golden(pp)
        if r < best[0]:
            best = (r, ah, pp)
    r0, ah0, p0 = best
    for pp in np.geomspace(p0 / 1.25, p0 * 1.25, 20):
        ah, r = golden(pp)
        if r < best[0]:
            best = (r, ah, pp)
    r0, ah0, p0 = best
    if not np.isfinite(r0) or r0 > 1.0:
        return None, None
    return float(ah0), float(p0)


def _refine_isolated(pot, lo, hi):
    sl, sr = float(pot.v0p(lo)), float(pot.v0p(hi))
    if sl * sr < 0:
        return _bisect(pot.v0p, lo, hi)
    cl, cr = float(pot.v0pp(lo)), float(pot.v0pp(hi))
    if cl * cr < 0:  # V0' touches zero: flat inflection, V0'' changes sign
        return _bisect(pot.v0pp, lo, hi)
    # fallback: minimize |V0'|
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = abs(float(pot.v0p(c))), abs(float(pot.v0p(d)))
    for _ in range(200):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = abs(float(pot.v0p(c)))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = abs(float(pot.v0p(d)))
    return 0.5 * (a + b)


def _bisect(f, lo, hi, tol=1e-12, iters=200):
    fl = float(f(lo))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = float(f(mid))
        if fm == 0.0:
            return mid
        if fl * fm < 0:
            hi = mid
        else:
            lo, fl = mid, fm
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _side_signs(pot, alpha, beta, dx, tol, max_slope, max_scan=1.0):
    """Sign of V0' just outside the element, skipping sub-threshold zones."""
    def probe(start, direction):
        delta = 2 * dx
        while delta <= max_scan:
            s = float(pot.v0p(start + direction * delta))
            if abs(s) > tol * max_slope:
                return int(np.sign(s))
            delta *= 1.5
        return 0

    return (probe(alpha, -1.0), probe(beta, +1.0))


# ---------------------------------------------------------------------------
# vanishing order


def vanishing_order(pot: EffectivePotential, x0: float, max_order: int = 10,
                    rel_tol: float = 1e-4) -> OrderInfo:
    """Smallest k >= 2 with V0^(k)(x0) != 0, probed up to k = 2 * max_order.

    k = 2 uses the closed-form second derivative; k >= 3 uses central divided
    differences of V0 - level (level subtraction preserves precision) with
    Richardson extrapolation over dyadic steps, masked by the cancellation
    noise floor.  The threshold for "nonzero" is rel_tol * k! * range / 2^k,
    a Cauchy-scale normalization at radius 2.  A derivative is declared zero
    when the extrapolants decay monotonically below the threshold; if every
    probed order is zero the element is flagged infinitely degenerate.
    """
    if max_order > 10:
        raise ValueError("max_order is capped at 10")
    xg = np.arange(4096) * (pot.period / 4096)
    slope = np.asarray(pot.v0p(xg))
    max_slope = float(np.max(np.abs(slope)))
    if max_slope > 0 and abs(float(pot.v0p(x0))) > 1e-6 * max_slope:
        raise ClassificationError(f"x0 = {x0} is not a critical point of V0")
    v0x = np.asarray(pot.v0(xg))
    rng = float(np.max(v0x) - np.min(v0x))
    if rng == 0.0:
        return OrderInfo(None, None, True)
    level = float(pot.v0(x0))

    d2 = float(pot.v0pp(x0))
    if abs(d2) > rel_tol * 2.0 * rng / 4.0:
        return OrderInfo(2, d2, False)

    for k in range(3, 2 * max_order + 1):
        val = _probe_derivative(pot, x0, level, k, rel_tol, rng)
        if val is not None:
            return OrderInfo(k, val, False)
    return OrderInfo(None, None, True)


def _probe_derivative(pot, x0, level, k, rel_tol, rng):
    """Estimate of V0^(k)(x0) if credibly nonzero, else None.

    Conservative by construction: a derivative counts as nonzero only when
    consecutive extrapolants above the threshold agree to 25%.  Estimates are
    discarded when the stencil leaves the unit neighbourhood or when the
    cancellation noise floor reaches a quarter of the signal, so detection
    saturates around k ~ 12 in double precision; beyond that the infinite
    flag is the honest answer."""
    binom = np.array([math.comb(k, i) * (-1) ** i for i in range(k + 1)], dtype=float)
    offsets = k / 2.0 - np.arange(k + 1)
    tau = rel_tol * math.factorial(k) * rng / 2.0 ** k

    j_start = max(2, int(math.ceil(math.log2(max(k / 2.0, 1.0)))))
    ests, noises = [], []
    for j in range(j_start, 13):
        t = 2.0 ** (-j)
        g = np.asarray(pot.v0(x0 + offsets * t), dtype=float) - level
        d = float(np.dot(binom, g)) / t ** k
        noise = 2.0 ** k * _EPS * (abs(level) + float(np.max(np.abs(g)))) / t ** k
        ests.append(d)
        noises.append(noise)
    ests = np.array(ests)
    noises = np.array(noises)
    valid = noises < 0.25 * np.maximum(np.abs(ests), tau)
    if not valid.any():
        return None
    idx = np.nonzero(valid)[0]
    # a genuine k-th derivative makes consecutive dyadic estimates agree up to
    # the O(t^2) scheme error; anything that swings between steps is remainder
    # leakage, not a derivative.  Richardson the last agreeing pair.
    best = None
    for a, b in zip(idx[:-1], idx[1:]):
        if b != a + 1:
            continue
        da, db = ests[a], ests[b]
        if abs(db) >= tau and abs(da - db) <= 0.3 * abs(db):
            best = (4.0 * db - da) / 3.0
    if best is not None and abs(best) >= tau:
        return best
    return None


# ---------------------------------------------------------------------------
# taxonomy and predicted exponents


def classify_element(stub: CriticalElement, info: OrderInfo,
                     pot: EffectivePotential) -> CriticalElement:
    """Assign the taxonomy tag from side signs, interval width and order."""
    if stub.taxonomy == GLOBAL_CYLINDER:
        return stub
    sl, sr = stub.side_signs
    if 0 in (sl, sr):
        raise ClassificationError(
            f"ambiguous slope signs {stub.side_signs} beside [{stub.alpha}, {stub.beta}]")

    is_interval = stub.width > 0.0
    stub.infinite_order = info.infinite
    if not info.infinite and info.k is not None:
        stub.order = info.k // 2 if info.k % 2 == 0 else (info.k - 1) // 2

    if (sl, sr) == (-1, +1):
        stub.taxonomy = WEAKLY_STABLE_MIN
        return stub
    if (sl, sr) == (+1, -1):
        if is_interval:
            stub.taxonomy = CYLINDER_MAX
            stub.infinite_order = True
            return stub
        if info.infinite:
            stub.taxonomy = INF_DEG_MAX
            return stub
        if info.k % 2 == 1:
            raise ClassificationError(
                f"odd vanishing order {info.k} at a two-sided maximum near x = {stub.center}")
        stub.taxonomy = NONDEG_MAX if stub.order == 1 else FINITE_DEG_MAX
        return stub
    # monotone through: (-1, -1) or (+1, +1)
    if is_interval or info.infinite:
        stub.taxonomy = CYLINDER_INFLECTION
        stub.infinite_order = True
        return stub
    if info.k % 2 == 0:
        raise ClassificationError(
            f"even vanishing order {info.k} at a monotone crossing near x = {stub.center}")
    stub.taxonomy = INFLECTION
    return stub


def predicted_exponent(elem: CriticalElement) -> Optional[PredictedRate]:
    """Predicted h-scaling exponent of the restricted gap near the element.

    Returns None for weakly stable minima (no inverse estimate applies)."""
    t = elem.taxonomy
    if t == WEAKLY_STABLE_MIN:
        return None
    if t == NONDEG_MAX:
        return PredictedRate(Fraction(1), True, False)
    if t == FINITE_DEG_MAX:
        m = elem.order
        return PredictedRate(Fraction(2 * m, m + 1), False, False)
    if t == INFLECTION:
        m2 = elem.order
        return PredictedRate(Fraction(4 * m2 + 2, 2 * m2 + 3), False, False)
    if t in (INF_DEG_MAX, CYLINDER_MAX, CYLINDER_INFLECTION, GLOBAL_CYLINDER):
        return PredictedRate(Fraction(2), False, True)
    raise ClassificationError(f"element has no taxonomy: {elem}")


def classify_curve(curve_or_pot, grid_size: int = 4096, tol: float = 1e-8,
                   cap: int = 64, max_order: int = 10):
    """Full pipeline: locate, order-probe and classify every critical element."""
    from .geometry import effective_potential
    from .profiles import GeneratingCurve

    pot = (effective_potential(curve_or_pot)
           if isinstance(curve_or_pot, GeneratingCurve) else curve_or_pot)
    stubs, cvs = find_critical_intervals(pot, grid_size=grid_size, tol=tol, cap=cap)
    out = []
    for stub in stubs:
        if stub.taxonomy == GLOBAL_CYLINDER:
            out.append(stub)
            continue
        if stub.width > 0.0:
            info = OrderInfo(None, None, True)
        else:
            info = vanishing_order(pot, stub.center, max_order=max_order)
        out.append(classify_element(stub, info, pot))
    return out, cvs
