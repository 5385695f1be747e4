"""Smooth closed boundary curves and their anchored arc-length parameterization.

A curve is given by a raw 2*pi-periodic parameterization x(t), y(t).  The
arc-length map is computed spectrally (FFT of the speed, integrated term by
term) and inverted with a bracketed Newton iteration.  Arc length ``s`` is
anchored so that the outward normal at ``s = 0`` equals the incidence
direction, i.e. the point ``gamma(0)`` is the shadow pole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Invalid geometry parameters."""


class ConsistencyError(RuntimeError):
    """A geometric construction failed an internal self-check."""


class AmbiguousShadowError(GeometryError):
    """The map s -> alpha . nu(s) has more than two sign changes."""

    def __init__(self, roots):
        self.roots = list(roots)
        super().__init__(
            f"expected exactly two shadow boundaries, found {len(self.roots)}: "
            + ", ".join(f"{r:.12g}" for r in self.roots)
        )


# raw parameterizations: t -> (x, y, x', y', x'', y'')
RawParam = Callable[[np.ndarray], tuple]


def _circle(radius: float) -> RawParam:
    def f(t):
        c, s = np.cos(t), np.sin(t)
        return radius * c, radius * s, -radius * s, radius * c, -radius * c, -radius * s

    return f


def _ellipse(a: float, b: float) -> RawParam:
    def f(t):
        c, s = np.cos(t), np.sin(t)
        return a * c, b * s, -a * s, b * c, -a * c, -b * s

    return f


def _kite() -> RawParam:
    def f(t):
        c, s = np.cos(t), np.sin(t)
        c2, s2 = np.cos(2 * t), np.sin(2 * t)
        return (
            c + 0.65 * c2 - 0.65,
            1.5 * s,
            -s - 1.3 * s2,
            1.5 * c,
            -c - 2.6 * c2,
            -1.5 * s,
        )

    return f


@dataclass(frozen=True)
class BoundaryCurve:
    """A closed C-infinity curve, optionally anchored in arc length.

    ``point``, ``tangent``, ``normal`` and ``curvature`` take arc-length
    values (any real, reduced modulo ``length``).  Before anchoring,
    ``t0`` is 0 and arc length is measured from raw parameter 0.
    """

    kind: str
    params: dict
    raw: RawParam = field(repr=False)
    length: float = 0.0
    t0: float = 0.0
    _coef: np.ndarray = field(default=None, repr=False)  # speed Fourier coefs, m >= 1
    _mean_speed: float = 0.0
    _s0: float = 0.0  # cumulative raw arc length at t0

    # raw-parameter helpers --------------------------------------------------
    def raw_point(self, t):
        x, y, *_ = self.raw(np.asarray(t, dtype=float))
        return np.stack([x, y], axis=-1)

    def raw_speed(self, t):
        _, _, xp, yp, _, _ = self.raw(np.asarray(t, dtype=float))
        return np.hypot(xp, yp)

    def raw_normal(self, t):
        _, _, xp, yp, _, _ = self.raw(np.asarray(t, dtype=float))
        sp = np.hypot(xp, yp)
        return np.stack([yp / sp, -xp / sp], axis=-1)

    def signed_area(self) -> float:
        t = np.linspace(0.0, TWO_PI, 2048, endpoint=False)
        x, y, xp, yp, _, _ = self.raw(t)
        return 0.5 * np.mean(x * yp - y * xp) * TWO_PI

    def raw_arclength(self, t):
        """Cumulative arc length from raw parameter 0 to t (t may exceed 2 pi)."""
        t = np.asarray(t, dtype=float)
        m = np.arange(1, self._coef.size + 1)
        tt = t[..., None] * m
        # antiderivative of sum_m (a_m cos mt + b_m sin mt), vanishing at t = 0
        a = self._coef.real
        b = -self._coef.imag
        series = (a * np.sin(tt) + b * (1.0 - np.cos(tt))) / m
        return self._mean_speed * t + 2.0 * series.sum(axis=-1)

    # arc-length accessors ---------------------------------------------------
    def raw_parameter(self, s, tol: float = 1e-13):
        """Raw parameter t with arc length t0 -> t equal to s (mod length)."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        target = s + self._s0
        lo = np.full(s.shape, self.t0 - 1e-9) + 0.0
        hi = np.full(s.shape, self.t0 + TWO_PI + 1e-9)
        t = self._initial_guess(target)
        for _ in range(60):
            f = self.raw_arclength(t) - target
            lo = np.where(f < 0, t, lo)
            hi = np.where(f > 0, t, hi)
            step = f / self.raw_speed(t)
            tn = t - step
            bad = (tn < lo) | (tn > hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            done = np.abs(tn - t) < tol
            t = tn
            if np.all(done):
                break
        return t

    def _initial_guess(self, target):
        grid = np.linspace(self.t0, self.t0 + TWO_PI, 1025)
        table = self.raw_arclength(grid)
        return np.interp(target, table, grid)

    def arclength_of(self, t):
        """Inverse of ``raw_parameter``: arc length (in [0, L)) of raw parameter t."""
        t = np.asarray(t, dtype=float)
        tt = self.t0 + np.mod(t - self.t0, TWO_PI)
        return np.mod(self.raw_arclength(tt) - self._s0, self.length)

    def _frame(self, s):
        t = self.raw_parameter(s)
        x, y, xp, yp, xpp, ypp = self.raw(t)
        return x, y, xp, yp, xpp, ypp

    def point(self, s):
        x, y, *_ = self._frame(s)
        return np.stack([x, y], axis=-1)

    def tangent(self, s):
        _, _, xp, yp, _, _ = self._frame(s)
        sp = np.hypot(xp, yp)
        return np.stack([xp / sp, yp / sp], axis=-1)

    def normal(self, s):
        """Outward unit normal (tangent rotated by -90 degrees)."""
        tan = self.tangent(s)
        return np.stack([tan[..., 1], -tan[..., 0]], axis=-1)

    def curvature(self, s):
        _, _, xp, yp, xpp, ypp = self._frame(s)
        return (xp * ypp - yp * xpp) / np.hypot(xp, yp) ** 3

    def frame(self, s):
        """Return point, outward normal and curvature at arc lengths s."""
        x, y, xp, yp, xpp, ypp = self._frame(s)
        sp = np.hypot(xp, yp)
        pts = np.stack([x, y], axis=-1)
        nrm = np.stack([yp / sp, -xp / sp], axis=-1)
        return pts, nrm, (xp * ypp - yp * xpp) / sp**3


def _speed_coefficients(raw: RawParam, tol: float = 1e-16):
    n = 64
    while True:
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        _, _, xp, yp, _, _ = raw(t)
        c = np.fft.rfft(np.hypot(xp, yp)) / n
        tail = np.abs(c[n // 4:]).max()
        if tail < tol * abs(c[0]) or n >= 2**16:
            break
        n *= 2
    keep = np.nonzero(np.abs(c) > 1e-17 * abs(c[0]))[0].max()
    return c[0].real, c[1:keep + 1].copy()


def make_curve(kind: str, **params) -> BoundaryCurve:
    """Build a curve of the given kind: circle(radius), ellipse(a, b) or kite."""
    if kind == "circle":
        radius = float(params.get("radius", 1.0))
        if not radius > 0:
            raise GeometryError("circle radius must be positive")
        raw = _circle(radius)
        params = {"radius": radius}
    elif kind == "ellipse":
        a = float(params.get("a", 2.0))
        b = float(params.get("b", 1.0))
        if not (a > 0 and b > 0):
            raise GeometryError("ellipse semi-axes must be positive")
        raw = _ellipse(a, b)
        params = {"a": a, "b": b}
    elif kind == "kite":
        raw = _kite()
        params = {}
    else:
        raise GeometryError(f"unknown geometry kind {kind!r}")
    return custom_curve(raw, kind=kind, params=params)


def custom_curve(raw: RawParam, kind: str = "custom-parametric", params=None) -> BoundaryCurve:
    """Wrap a raw parameterization returning (x, y, x', y', x'', y'')."""
    mean, coef = _speed_coefficients(raw)
    curve = BoundaryCurve(
        kind=kind, params=dict(params or {}), raw=raw,
        length=TWO_PI * mean, _coef=coef, _mean_speed=mean,
    )
    if curve.signed_area() <= 0:
        raise GeometryError("curve must be counterclockwise (positive signed area)")
    return curve


def _unit(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    nrm = np.linalg.norm(alpha)
    if alpha.shape != (2,) or not nrm > 0:
        raise GeometryError("incidence direction must be a nonzero 2-vector")
    return alpha / nrm


def arc_length_reparam(curve: BoundaryCurve, alpha) -> BoundaryCurve:
    """Anchor the arc-length parameterization so that alpha . nu(gamma(0)) = 1.

    Among several points with normal equal to alpha (non-convex curves) the
    one furthest downstream, i.e. with the largest alpha . x, is chosen.
    """
    alpha = _unit(alpha)
    t = np.linspace(0.0, TWO_PI, 4097)
    _, _, xp, yp, _, _ = curve.raw(t)
    # alpha . tangent vanishes where alpha . nu is extremal
    g = alpha[0] * xp + alpha[1] * yp
    roots = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
        if g[i] == 0.0:
            roots.append(t[i])
            continue
        if g[i + 1] == 0.0:
            continue
        roots.append(brentq(lambda u: alpha @ curve.raw(np.array(u))[2:4], t[i], t[i + 1],
                            xtol=1e-15, rtol=1e-15))
    best = None
    for r in roots:
        an = alpha @ curve.raw_normal(np.array(r))
        if abs(an - 1.0) < 1e-10:
            ax = alpha @ curve.raw_point(np.array(r))
            if best is None or ax > best[1]:
                best = (r, ax)
    if best is None:
        raise ConsistencyError("no boundary point has outward normal equal to alpha")
    t0 = float(np.mod(best[0], TWO_PI))
    anchored = BoundaryCurve(
        kind=curve.kind, params=curve.params, raw=curve.raw, length=curve.length,
        t0=t0, _coef=curve._coef, _mean_speed=curve._mean_speed,
        _s0=float(curve.raw_arclength(np.array(t0))),
    )
    return anchored


def alpha_dot_normal(curve: BoundaryCurve, alpha, s):
    return curve.normal(s) @ _unit(alpha)


def shadow_boundaries(curve: BoundaryCurve, alpha, n_grid: int = 4096):
    """Arc lengths 0 < t1 < t2 < L where alpha . nu changes sign.

    (t1, t2) is the illuminated arc (alpha . nu < 0); (t2, t1 + L) the shadow.
    """
    alpha = _unit(alpha)
    L = curve.length
    s = np.linspace(0.0, L, n_grid + 1)
    f = alpha_dot_normal(curve, alpha, s)
    roots = []
    for i in np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]:
        if f[i + 1] == 0.0:
            continue
        if f[i] == 0.0:
            roots.append(s[i])
            continue
        roots.append(brentq(lambda u: alpha_dot_normal(curve, alpha, np.array(u)),
                            s[i], s[i + 1], xtol=1e-14, rtol=1e-15))
    if len(roots) != 2:
        raise AmbiguousShadowError(roots)
    t1, t2 = sorted(roots)
    mid = alpha_dot_normal(curve, alpha, np.array(0.5 * (t1 + t2)))
    if not (0 < t1 < t2 < L) or mid >= 0:
        raise ConsistencyError("shadow boundaries do not bracket an illuminated arc")
    return float(t1), float(t2)


def illuminated_pole(curve: BoundaryCurve, alpha, t1: float, t2: float) -> float:
    """Arc length in (t1, t2) where alpha . nu = -1; the most upstream one if several."""
    alpha = _unit(alpha)
    s = np.linspace(t1, t2, 4097)
    tan = curve.tangent(s)
    g = tan @ alpha
    best = None
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
        if g[i] == 0.0:
            r = s[i]
        elif g[i + 1] == 0.0:
            continue
        else:
            r = brentq(lambda u: curve.tangent(np.array(u)) @ alpha, s[i], s[i + 1], xtol=1e-14)
        if abs(alpha_dot_normal(curve, alpha, np.array(r)) + 1.0) < 1e-8:
            ax = curve.point(np.array(r)) @ alpha
            if best is None or ax < best[1]:
                best = (float(r), ax)
    if best is None:
        raise ConsistencyError("no illuminated point has alpha . nu = -1")
    return best[0]


@dataclass(frozen=True)
class ScatteringConfig:
    """Anchored curve, wavenumber, incidence and shadow-boundary arc lengths."""

    curve: BoundaryCurve
    k: float
    alpha: np.ndarray
    t1: float
    t2: float

    @property
    def length(self) -> float:
        return self.curve.length

    @property
    def wavelength(self) -> float:
        return TWO_PI / self.k

    def with_k(self, k: float) -> "ScatteringConfig":
        if not k > 0:
            raise GeometryError("wavenumber must be positive")
        return ScatteringConfig(self.curve, float(k), self.alpha, self.t1, self.t2)

    def in_shadow(self, s):
        """Membership of s (mod L) in the open shadow arc (t2, t1 + L)."""
        s = np.mod(np.asarray(s, dtype=float), self.length)
        return (s > self.t2) | (s < self.t1)


def make_config(curve: BoundaryCurve, k: float, alpha) -> ScatteringConfig:
    """Anchor ``curve`` for direction ``alpha`` and locate its shadow boundaries."""
    if not k > 0:
        raise GeometryError("wavenumber must be positive")
    alpha = _unit(alpha)
    anchored = arc_length_reparam(curve, alpha)
    t1, t2 = shadow_boundaries(anchored, alpha)
    return ScatteringConfig(anchored, float(k), alpha, t1, t2)

