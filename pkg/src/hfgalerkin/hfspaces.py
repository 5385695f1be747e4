"""Region partitions and oscillation-weighted Galerkin spaces.

Two partition families are supported:

* ``cov`` -- six or eight intervals.  The four transition intervals carry
  the frequency dependent change of variables
  ``phi(u) = t +/- varphi(u) k**psi(u)`` with affine ``varphi`` and linear
  ``psi`` running between -1/3 (shadow-boundary side) and 0.
* ``freq`` -- ``4m`` intervals whose transition zones are split at the
  points ``t +/- c k**(-1/3 + eps_j)``.

Every basis function is ``exp(ik alpha . gamma(s))`` times a polynomial
(algebraic family, ``rho**r`` with ``rho`` onto [-1, 1]) or a trigonometric
monomial (``exp(i r rho)``, ``rho`` onto [0, 2 pi]) in the pre-image
variable ``u = phi^{-1}(s)``.  Trigonometric spaces overlap their
neighbours through a C-infinity partition of unity.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import ScatteringConfig, illuminated_pole

THIRD = 1.0 / 3.0

TRANSITION = "transition"
SHADOW_BOUNDARY = "shadow-boundary"
ILLUMINATED = "illuminated"
DEEP_SHADOW = "deep-shadow"


class InfeasiblePartition(ValueError):
    """Partition parameters violate the ordering constraints."""


class InvalidParameter(ValueError):
    """A space or partition parameter is out of range."""


# ---------------------------------------------------------------------------
# change of variables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChangeOfVariables:
    """phi(u) = anchor + sign * varphi(u) * k**psi(u) on [a, b].

    ``varphi`` and ``psi`` interpolate linearly between their endpoint
    values.  Outside [a, b] the map is continued by its tangent lines so
    that overlapping trigonometric spaces can use it.
    """

    tag: str
    a: float
    b: float
    anchor: float
    sign: float
    varphi_a: float
    varphi_b: float
    psi_a: float
    psi_b: float
    k: float

    def _raw(self, u):
        x = (u - self.a) / (self.b - self.a)
        vp = self.varphi_a + (self.varphi_b - self.varphi_a) * x
        ps = self.psi_a + (self.psi_b - self.psi_a) * x
        return vp, ps

    def varphi(self, u):
        return self._raw(np.asarray(u, dtype=float))[0]

    def psi(self, u):
        return self._raw(np.asarray(u, dtype=float))[1]

    def _core(self, u):
        vp, ps = self._raw(u)
        kp = self.k ** ps
        w = self.b - self.a
        dvp = (self.varphi_b - self.varphi_a) / w
        dps = (self.psi_b - self.psi_a) / w
        val = self.anchor + self.sign * vp * kp
        der = self.sign * kp * (dvp + vp * dps * math.log(self.k))
        return val, der

    def forward(self, u, extend: bool = False):
        """phi(u); with ``extend`` the tangent-line continuation applies outside [a, b]."""
        return self.forward_with_derivative(u, extend)[0]

    def derivative(self, u, extend: bool = False):
        return self.forward_with_derivative(u, extend)[1]

    def forward_with_derivative(self, u, extend: bool = False):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.a) & (u <= self.b)
        if not extend and not np.all(inside):
            raise InvalidParameter(f"{self.tag}: argument outside [{self.a}, {self.b}]")
        val, der = self._core(np.clip(u, self.a, self.b))
        if extend:
            below = u < self.a
            above = u > self.b
            if np.any(below):
                da = self._core(np.array(self.a))[1]
                val = np.where(below, self.a + da * (u - self.a), val)
                der = np.where(below, da, der)
            if np.any(above):
                db = self._core(np.array(self.b))[1]
                val = np.where(above, self.b + db * (u - self.b), val)
                der = np.where(above, db, der)
        return val, der

    def inverse(self, y, extend: bool = False, tol: float = 1e-13):
        """u with phi(u) = y; safeguarded Newton with a bisection fallback."""
        y = np.asarray(y, dtype=float)
        if not extend and (np.any(y < self.a - 1e-12) or np.any(y > self.b + 1e-12)):
            raise InvalidParameter(f"{self.tag}: value outside [{self.a}, {self.b}]")
        out = np.empty(y.shape)
        flat_y = y.ravel()
        res = out.ravel()
        lo_mask = flat_y < self.a
        hi_mask = flat_y > self.b
        mid = ~(lo_mask | hi_mask)
        if np.any(lo_mask):
            res[lo_mask] = self.a + (flat_y[lo_mask] - self.a) / self._core(np.array(self.a))[1]
        if np.any(hi_mask):
            res[hi_mask] = self.b + (flat_y[hi_mask] - self.b) / self._core(np.array(self.b))[1]
        if np.any(mid):
            yy = flat_y[mid]
            lo = np.full(yy.shape, self.a)
            hi = np.full(yy.shape, self.b)
            u = np.full(yy.shape, 0.5 * (self.a + self.b))
            for _ in range(200):
                val, der = self._core(u)
                f = val - yy
                lo = np.where(f < 0, u, lo)
                hi = np.where(f > 0, u, hi)
                un = u - f / der
                bad = ~((un > lo) & (un < hi))
                un = np.where(bad, 0.5 * (lo + hi), un)
                done = np.abs(un - u) <= tol * (self.b - self.a)
                u = un
                if np.all(done):
                    break
            u = np.where(yy == self.a, self.a, u)
            u = np.where(yy == self.b, self.b, u)
            res[mid] = u
        return res.reshape(y.shape)[()]


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Interval:
    tag: str
    a: float
    b: float
    kind: str
    cov: ChangeOfVariables | None = None

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def mapped(self) -> bool:
        return self.cov is not None

    def to_preimage(self, s, extend: bool = False):
        return s if self.cov is None else self.cov.inverse(s, extend=extend)

    def from_preimage(self, u, extend: bool = False):
        """Return (s, ds/du) for pre-image values u."""
        if self.cov is None:
            u = np.asarray(u, dtype=float)
            return u, np.ones_like(u)
        return self.cov.forward_with_derivative(u, extend=extend)


@dataclass(frozen=True)
class PartitionParams:
    """xi/zeta coefficients; the primed values are used by the cov family only."""

    xi1: float
    xi2: float
    zeta1: float
    zeta2: float
    xi1p: float = 0.0
    xi2p: float = 0.0
    zeta1p: float = 0.0
    zeta2p: float = 0.0

    def as_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class RegionPartition:
    """Ordered intervals covering one period [start, start + L)."""

    intervals: tuple
    mode: str
    params: PartitionParams
    k: float
    t1: float
    t2: float
    length: float
    J: int | None = None
    m: int | None = None
    eps: tuple | None = None

    @property
    def start(self) -> float:
        return self.intervals[0].a

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([iv.a for iv in self.intervals] + [self.intervals[-1].b])

    def tags(self):
        return [iv.tag for iv in self.intervals]

    def index(self, tag: str) -> int:
        return self.tags().index(tag)

    def locate(self, s):
        """Interval index of each s (mod L), half-open [a_j, b_j)."""
        u = self.unwrap(s)
        idx = np.searchsorted(self.breakpoints, u, side="right") - 1
        return np.clip(idx, 0, len(self.intervals) - 1)

    def unwrap(self, s):
        """Representative of s (mod L) in [start, start + L)."""
        s = np.asarray(s, dtype=float)
        return self.start + np.mod(s - self.start, self.length)


def _check_positive(params: PartitionParams, names):
    for n in names:
        v = getattr(params, n)
        if not (v > 0 and math.isfinite(v)):
            raise InvalidParameter(f"partition parameter {n} must be positive, got {v}")


def _cov_transition(tag, a, b, anchor, sign, va, vb, pa, pb, k):
    cov = ChangeOfVariables(tag, a, b, anchor, sign, va, vb, pa, pb, k)
    return Interval(tag, a, b, TRANSITION, cov)


def build_cov_partition(config: ScatteringConfig, params: PartitionParams, J: int = 6,
                        rtol: float = 1e-10) -> RegionPartition:
    """Six- or eight-interval partition with changes of variables on transitions."""
    if J not in (6, 8):
        raise InvalidParameter("J must be 6 or 8")
    _check_positive(params, ["xi1", "xi2", "zeta1", "zeta2", "xi1p", "xi2p", "zeta1p", "zeta2p"])
    k, t1, t2, L = config.k, config.t1, config.t2, config.length
    if not k > 1:
        raise InvalidParameter("change-of-variables partitions need k > 1")
    p = params
    tol = rtol * L
    chain_a = [("t1 + xi1 <= t1 + xi1'", t1 + p.xi1, t1 + p.xi1p),
               ("t2 - xi2' <= t2 - xi2", t2 - p.xi2p, t2 - p.xi2)]
    chain_b = [("t2 + zeta2 <= t2 + zeta2'", t2 + p.zeta2, t2 + p.zeta2p),
               ("L + t1 - zeta1' <= L + t1 - zeta1", L + t1 - p.zeta1p, L + t1 - p.zeta1)]
    for name, lhs, rhs in chain_a + chain_b:
        if lhs > rhs + tol:
            raise InfeasiblePartition(f"violated: {name}")
    gap_a = (t2 - p.xi2p) - (t1 + p.xi1p)
    gap_b = (L + t1 - p.zeta1p) - (t2 + p.zeta2p)
    if J == 6:
        if abs(gap_a) > tol:
            raise InfeasiblePartition("J = 6 needs equality in (A): t1 + xi1' = t2 - xi2'")
        if abs(gap_b) > tol:
            raise InfeasiblePartition("J = 6 needs equality in (B): t2 + zeta2' = L + t1 - zeta1'")
    else:
        if gap_a <= tol:
            raise InfeasiblePartition("J = 8 needs strict (A): t1 + xi1' < t2 - xi2'")
        if gap_b <= tol:
            raise InfeasiblePartition("J = 8 needs strict (B): t2 + zeta2' < L + t1 - zeta1'")
    kc = k ** (-THIRD)
    it1 = (t1 + p.xi1 * kc, t1 + p.xi1p)
    it2 = (t2 - p.xi2p, t2 - p.xi2 * kc)
    st1 = (t1 - p.zeta1p, t1 - p.zeta1 * kc)
    st2 = (t2 + p.zeta2 * kc, t2 + p.zeta2p)
    if J == 6:
        # snap the meeting points so the intervals tile exactly
        mid = 0.5 * (it1[1] + it2[0])
        it1, it2 = (it1[0], mid), (mid, it2[1])
        mid = 0.5 * (st2[1] + st1[0] + L)
        st2, st1 = (st2[0], mid), (mid - L, st1[1])
    ivs = [
        _cov_transition("ST1", *st1, t1, -1.0, p.zeta1p, p.zeta1, 0.0, -THIRD, k),
        Interval("SB1", t1 - p.zeta1 * kc, t1 + p.xi1 * kc, SHADOW_BOUNDARY),
        _cov_transition("IT1", *it1, t1, 1.0, p.xi1, p.xi1p, -THIRD, 0.0, k),
    ]
    if J == 8:
        ivs.append(Interval("IL", it1[1], it2[0], ILLUMINATED))
    ivs += [
        _cov_transition("IT2", *it2, t2, -1.0, p.xi2p, p.xi2, 0.0, -THIRD, k),
        Interval("SB2", t2 - p.xi2 * kc, t2 + p.zeta2 * kc, SHADOW_BOUNDARY),
        _cov_transition("ST2", *st2, t2, 1.0, p.zeta2, p.zeta2p, -THIRD, 0.0, k),
    ]
    if J == 8:
        ivs.append(Interval("DS", st2[1], st1[0] + L, DEEP_SHADOW))
    _check_tiling(ivs, L)
    for iv in ivs:
        # phi' is sign * k**psi * (affine), so checking both ends suffices
        if iv.cov is not None and not np.all(iv.cov.derivative(np.array([iv.a, iv.b])) > 0):
            raise InfeasiblePartition(f"change of variables on {iv.tag} is not increasing")
    return RegionPartition(tuple(ivs), "cov", params, k, t1, t2, L, J=J)


def corollary_eps(m: int) -> tuple:
    """eps_j = (1/3)(2m - 2j + 1)/(2m + 1), j = 1..m."""
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    return tuple(THIRD * (2 * m - 2 * j + 1) / (2 * m + 1) for j in range(1, m + 1))


def build_freq_adapted_partition(config: ScatteringConfig, params: PartitionParams, m: int,
                                 eps=None) -> RegionPartition:
    """4m-interval partition: split transition zones, shadow boundaries, IL and DS."""
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    eps = corollary_eps(m) if eps is None else tuple(float(e) for e in eps)
    if len(eps) != m:
        raise InvalidParameter(f"expected {m} eps values, got {len(eps)}")
    if not (0 <= eps[-1] and eps[0] < THIRD and all(a > b for a, b in zip(eps, eps[1:]))):
        raise InvalidParameter("eps schedule must satisfy 0 <= eps_m < ... < eps_1 < 1/3")
    _check_positive(params, ["xi1", "xi2", "zeta1", "zeta2"])
    k, t1, t2, L = config.k, config.t1, config.t2, config.length
    if not k > 1:
        raise InvalidParameter("frequency-adapted partitions need k > 1")
    p = params
    kp = [k ** (-THIRD + e) for e in eps]  # decreasing in j
    ivs = []
    for j in range(1, m):  # far -> near
        ivs.append(Interval(f"ST1^{j}", t1 - p.zeta1 * kp[j - 1], t1 - p.zeta1 * kp[j], TRANSITION))
    ivs.append(Interval("SB1", t1 - p.zeta1 * kp[-1], t1 + p.xi1 * kp[-1], SHADOW_BOUNDARY))
    for j in range(m - 1, 0, -1):
        ivs.append(Interval(f"IT1^{j}", t1 + p.xi1 * kp[j], t1 + p.xi1 * kp[j - 1], TRANSITION))
    ivs.append(Interval("IL", t1 + p.xi1 * kp[0], t2 - p.xi2 * kp[0], ILLUMINATED))
    for j in range(1, m):
        ivs.append(Interval(f"IT2^{j}", t2 - p.xi2 * kp[j - 1], t2 - p.xi2 * kp[j], TRANSITION))
    ivs.append(Interval("SB2", t2 - p.xi2 * kp[-1], t2 + p.zeta2 * kp[-1], SHADOW_BOUNDARY))
    for j in range(m - 1, 0, -1):
        ivs.append(Interval(f"ST2^{j}", t2 + p.zeta2 * kp[j], t2 + p.zeta2 * kp[j - 1], TRANSITION))
    # deep shadow goes first (shifted back one period) so the list is increasing
    ds = Interval("DS", t2 + p.zeta2 * kp[0] - L, t1 - p.zeta1 * kp[0], DEEP_SHADOW)
    ivs = [ds] + ivs
    for iv in ivs:
        if iv.kind in (ILLUMINATED, DEEP_SHADOW) and iv.width <= 0:
            raise InfeasiblePartition(f"{iv.tag} is empty at k = {k}")
    _check_tiling(ivs, L)
    return RegionPartition(tuple(ivs), "freq", params, k, t1, t2, L, m=m, eps=eps)


def _check_tiling(ivs, L):
    for iv in ivs:
        if not iv.b > iv.a:
            raise InfeasiblePartition(f"interval {iv.tag} is empty or reversed")
    for left, right in zip(ivs, ivs[1:]):
        if abs(left.b - right.a) > 1e-9 * L:
            raise InfeasiblePartition(f"gap or overlap between {left.tag} and {right.tag}")
    total = ivs[-1].b - ivs[0].a
    if abs(total - L) > 1e-9 * L:
        raise InfeasiblePartition("intervals do not cover one period")


def initial_cov_params(config: ScatteringConfig, J: int = 6,
                       shrink: float = 0.8) -> PartitionParams:
    """Starting parameters: transitions meet at the poles where alpha . nu = -1 / +1.

    For J = 8 the primed values are scaled by ``shrink`` to leave room for IL and DS.
    """
    t1, t2, L = config.t1, config.t2, config.length
    p_ill = illuminated_pole(config.curve, config.alpha, t1, t2)
    xi1p, xi2p = p_ill - t1, t2 - p_ill
    zeta1p, zeta2p = t1, L - t2
    if J == 8:
        xi1p, xi2p, zeta1p, zeta2p = (shrink * v for v in (xi1p, xi2p, zeta1p, zeta2p))
    return PartitionParams(xi1=0.5 * xi1p, xi2=0.5 * xi2p, zeta1=0.5 * zeta1p, zeta2=0.5 * zeta2p,
                           xi1p=xi1p, xi2p=xi2p, zeta1p=zeta1p, zeta2p=zeta2p)


def initial_freq_params(config: ScatteringConfig, scale: float = 0.5) -> PartitionParams:
    """Frequency-adapted coefficients proportional to the pole distances."""
    t1, t2, L = config.t1, config.t2, config.length
    p_ill = illuminated_pole(config.curve, config.alpha, t1, t2)
    return PartitionParams(xi1=scale * (p_ill - t1), xi2=scale * (t2 - p_ill),
                           zeta1=scale * t1, zeta2=scale * (L - t2))


# ---------------------------------------------------------------------------
# partition of unity
# ---------------------------------------------------------------------------

def smooth_step(x, steepness: float = 1.0):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, value 1/2 at x = 1/2."""
    x = np.asarray(x, dtype=float)
    xa = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ha = np.where(xa > 0, np.exp(-steepness / xa), 0.0)
        hb = np.where(xa < 1, np.exp(-steepness / (1.0 - xa)), 0.0)
        out = ha / (ha + hb)
    return np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, out))


def overlap_widths(partition: RegionPartition, c: float = 0.5) -> np.ndarray:
    """Width of the blending zone at each right end b_j: min(0.25 * narrower width, c k^(-1/3))."""
    w = np.array([iv.width for iv in partition.intervals])
    neigh = np.minimum(w, np.roll(w, -1))
    return np.minimum(0.25 * neigh, c * partition.k ** (-THIRD))


def _as_widths(partition, overlap):
    J = len(partition.intervals)
    widths = np.broadcast_to(np.asarray(overlap, dtype=float), (J,)).copy()
    w = np.array([iv.width for iv in partition.intervals])
    neigh = np.minimum(w, np.roll(w, -1))
    if np.any(widths <= 0):
        raise InvalidParameter("overlap width must be positive")
    if np.any(widths >= neigh):
        raise InvalidParameter("overlap width exceeds an adjacent interval width")
    return widths


def partition_of_unity(partition: RegionPartition, overlap, s, steepness: float = 1.0):
    """Smooth weights chi_j(s), shape (len(s), J), summing to one.

    ``overlap`` is the blending-zone width per right endpoint b_j (scalar
    or length-J array); chi_j is supported in [a_j - w_{j-1}/2, b_j + w_j/2].
    """
    widths = _as_widths(partition, overlap)
    J = len(partition.intervals)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    L = partition.length
    # one blend value per breakpoint b_j, shared by chi_j (falling) and chi_{j+1} (rising)
    sigma = np.empty((J, s.size))
    for j, iv in enumerate(partition.intervals):
        d = np.mod(s - iv.b + 0.5 * L, L) - 0.5 * L
        sigma[j] = smooth_step(d / widths[j] + 0.5, steepness)
    out = np.zeros((s.size, J))
    for j, iv in enumerate(partition.intervals):
        wa, wb = widths[j - 1], widths[j]
        rel = np.mod(s - (iv.a - 0.5 * wa), L)
        inside = rel <= iv.width + 0.5 * (wa + wb)
        rise = np.where(rel < wa, sigma[j - 1], 1.0)
        fall = np.where(rel > iv.width + 0.5 * (wa - wb), 1.0 - sigma[j], 1.0)
        out[:, j] = np.where(inside, rise * fall, 0.0)
    return out


# ---------------------------------------------------------------------------
# Galerkin spaces
# ---------------------------------------------------------------------------

ALGEBRAIC = "algebraic"
TRIGONOMETRIC = "trigonometric"


@dataclass(frozen=True)
class GalerkinSpace:
    """Direct sum of oscillation-weighted local spaces over a partition."""

    partition: RegionPartition
    config: ScatteringConfig
    family: str
    degrees: tuple
    overlap: tuple | None = None  # trigonometric family: blending widths per b_j
    steepness: float = 1.0
    _support: tuple = field(default=None, repr=False)

    def __post_init__(self):
        J = len(self.partition.intervals)
        if len(self.degrees) != J:
            raise InvalidParameter(f"need {J} degrees, got {len(self.degrees)}")
        if any(d < 0 for d in self.degrees):
            raise InvalidParameter("degrees must be nonnegative")
        if self.family == TRIGONOMETRIC:
            if any(d % 2 for d in self.degrees):
                raise InvalidParameter("trigonometric spaces need even degrees")
            if self.overlap is None:
                object.__setattr__(self, "overlap", tuple(overlap_widths(self.partition)))
            widths = _as_widths(self.partition, self.overlap)
            object.__setattr__(self, "overlap", tuple(widths))
            object.__setattr__(self, "_support", self._trig_supports(widths))
        elif self.family != ALGEBRAIC:
            raise InvalidParameter(f"unknown family {self.family!r}")

    # --- bookkeeping --------------------------------------------------------
    @property
    def dimension(self) -> int:
        return sum(d + 1 for d in self.degrees)

    def indices(self, j: int) -> np.ndarray:
        """Global column indices of the basis functions attached to interval j."""
        start = sum(d + 1 for d in self.degrees[:j])
        return np.arange(start, start + self.degrees[j] + 1)

    def orders(self, j: int) -> np.ndarray:
        d = self.degrees[j]
        if self.family == ALGEBRAIC:
            return np.arange(d + 1)
        return np.arange(-d // 2, d // 2 + 1)

    def _trig_supports(self, widths):
        """Pre-image range mapped onto [0, 2 pi] for each trigonometric block."""
        ivs = self.partition.intervals
        out = []
        for j, iv in enumerate(ivs):
            lo = iv.a - 0.5 * widths[j - 1]
            hi = iv.b + 0.5 * widths[j]
            ulo = iv.to_preimage(np.array(lo), extend=True)
            uhi = iv.to_preimage(np.array(hi), extend=True)
            out.append((lo, hi, float(ulo), float(uhi)))
        return tuple(out)

    def weight(self, s):
        """Oscillatory factor exp(ik alpha . gamma(s))."""
        pts = self.config.curve.point(s)
        return np.exp(1j * self.config.k * (pts @ self.config.alpha))

    # --- local evaluation ----------------------------------------------------
    def local_values(self, j: int, u):
        """Polynomial factors of block j at pre-image points u, shape (len(u), d_j + 1)."""
        iv = self.partition.intervals[j]
        u = np.asarray(u, dtype=float)
        r = self.orders(j)
        if self.family == ALGEBRAIC:
            rho = 2.0 * (u - iv.a) / (iv.b - iv.a) - 1.0
            return rho[:, None] ** r[None, :]
        _, _, ulo, uhi = self._support[j]
        rho = 2.0 * np.pi * (u - ulo) / (uhi - ulo)
        return np.exp(1j * rho[:, None] * r[None, :])

    def block_values(self, j: int, s, u=None, closed: bool = False):
        """Block j evaluated at s (u = its pre-image if already known), phase excluded.

        Algebraic blocks use characteristic-function semantics on [a_j, b_j)
        (``closed`` includes b_j); trigonometric blocks include their
        partition-of-unity weight.
        """
        s = np.atleast_1d(np.asarray(s, dtype=float))
        iv = self.partition.intervals[j]
        out = np.zeros((s.size, self.degrees[j] + 1), dtype=complex)
        L = self.partition.length
        if self.family == ALGEBRAIC:
            if closed:
                rel = np.mod(s - iv.a, L)
                sel = rel <= iv.width * (1 + 1e-14)
                ss = iv.a + np.minimum(rel[sel], iv.width)
            else:
                sel = self.partition.locate(s) == j
                ss = self.partition.unwrap(s[sel])
            if not np.any(sel):
                return out
            uu = iv.to_preimage(np.clip(ss, iv.a, iv.b)) if u is None else np.asarray(u)[sel]
            out[sel] = self.local_values(j, uu)
            return out
        lo, hi, _, _ = self._support[j]
        rel = np.mod(s - lo, L)
        sel = rel <= hi - lo
        if not np.any(sel):
            return out
        ss = lo + rel[sel]
        uu = iv.to_preimage(ss, extend=True) if u is None else np.asarray(u)[sel]
        chi = partition_of_unity(self.partition, self.overlap, ss, self.steepness)[:, j]
        out[sel] = chi[:, None] * self.local_values(j, uu)
        return out

    def evaluate_basis(self, s):
        """All basis functions at s including the oscillatory weight, shape (len(s), dim)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((s.size, self.dimension), dtype=complex)
        for j in range(len(self.degrees)):
            out[:, self.indices(j)] = self.block_values(j, s)
        return out * self.weight(s)[:, None]

    def evaluate(self, coeffs, s):
        """Expansion sum_i coeffs_i basis_i(s)."""
        return self.evaluate_basis(s) @ np.asarray(coeffs)


def basis_eval(space: GalerkinSpace, j: int, r: int, s):
    """Single basis function (interval j, order r) at s; zero outside its support."""
    orders = list(space.orders(j))
    if r not in orders:
        raise InvalidParameter(f"order {r} not in block {j}")
    s = np.atleast_1d(np.asarray(s, dtype=float))
    vals = space.block_values(j, s, closed=True)[:, orders.index(r)]
    return vals * space.weight(s)


def cov_forward(cov: ChangeOfVariables, s):
    return cov.forward(s)


def cov_inverse(cov: ChangeOfVariables, y):
    return cov.inverse(y)


# ---------------------------------------------------------------------------
# settings and persistence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceSettings:
    """Wavenumber-independent description of a partition and space.

    ``family`` is one of alg-cov, trig-cov, alg-freq, trig-freq.
    """

    family: str = "alg-cov"
    J: int = 6
    m: int = 2
    eps: tuple | None = None
    params: PartitionParams | None = None
    degrees: tuple | int = 8
    overlap_c: float = 0.5
    steepness: float = 1.0

    FAMILIES = ("alg-cov", "trig-cov", "alg-freq", "trig-freq")

    @property
    def mode(self) -> str:
        return self.family.split("-")[1]

    @property
    def basis_family(self) -> str:
        return ALGEBRAIC if self.family.startswith("alg") else TRIGONOMETRIC

    @property
    def n_intervals(self) -> int:
        return self.J if self.mode == "cov" else 4 * self.m

    def with_degree(self, d) -> "SpaceSettings":
        return replace(self, degrees=d)

    def build_partition(self, config: ScatteringConfig) -> RegionPartition:
        if self.family not in self.FAMILIES:
            raise InvalidParameter(f"unknown family {self.family!r}")
        if self.mode == "cov":
            params = self.params or initial_cov_params(config, self.J)
            return build_cov_partition(config, params, self.J)
        params = self.params or initial_freq_params(config)
        return build_freq_adapted_partition(config, params, self.m, self.eps)

    def build_space(self, config: ScatteringConfig) -> GalerkinSpace:
        part = self.build_partition(config)
        J = len(part.intervals)
        degs = self.degrees
        degs = (int(degs),) * J if np.isscalar(degs) else tuple(int(d) for d in degs)
        overlap = None
        if self.basis_family == TRIGONOMETRIC:
            overlap = tuple(overlap_widths(part, self.overlap_c))
        return GalerkinSpace(part, config, self.basis_family, degs, overlap, self.steepness)


_PARAM_KEYS = ("xi1", "xi2", "zeta1", "zeta2", "xi1p", "xi2p", "zeta1p", "zeta2p")


def settings_to_config(settings: SpaceSettings) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    sec = {"family": settings.family, "J": str(settings.J), "m": str(settings.m),
           "overlap_c": repr(settings.overlap_c), "steepness": repr(settings.steepness)}
    degs = settings.degrees
    sec["degrees"] = str(degs) if np.isscalar(degs) else ", ".join(str(d) for d in degs)
    if settings.eps is not None:
        sec["eps"] = ", ".join(repr(float(e)) for e in settings.eps)
    if settings.params is not None:
        for key in _PARAM_KEYS:
            sec[key] = repr(float(getattr(settings.params, key)))
    cp["partition"] = sec
    return cp


def save_settings(path, settings: SpaceSettings) -> None:
    """Write settings as a [partition] key-value section."""
    with open(path, "w") as fh:
        settings_to_config(settings).write(fh)


def settings_from_section(sec) -> SpaceSettings:
    def floats(text):
        return tuple(float(v) for v in text.replace(",", " ").split())

    kw = {}
    if "family" in sec:
        kw["family"] = sec["family"].strip()
    if "j" in sec:
        kw["J"] = int(sec["j"])
    if "m" in sec:
        kw["m"] = int(sec["m"])
    if "eps" in sec:
        kw["eps"] = floats(sec["eps"])
    if "degrees" in sec:
        degs = tuple(int(v) for v in floats(sec["degrees"]))
        kw["degrees"] = degs[0] if len(degs) == 1 else degs
    if "overlap_c" in sec:
        kw["overlap_c"] = float(sec["overlap_c"])
    if "steepness" in sec:
        kw["steepness"] = float(sec["steepness"])
    if any(key in sec for key in _PARAM_KEYS):
        vals = {key: float(sec.get(key, 0.0)) for key in _PARAM_KEYS}
        kw["params"] = PartitionParams(**vals)
    return SpaceSettings(**kw)


def load_settings(path) -> SpaceSettings:
    cp = configparser.ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    if "partition" not in cp:
        raise InvalidParameter(f"{path}: missing [partition] section")
    return settings_from_section(cp["partition"])
