"""Combined-field boundary operator, Nystrom reference solver and circle oracle.

The sound-soft direct formulation solves

    (1/2) eta + D' eta - i k S eta = f,   f = ik (alpha . nu - 1) exp(ik alpha . x)

for the surface current ``eta = d(u + u_inc)/dnu``.  The kernel of
``D' - ikS`` is

    K(x, y) = (ik/4) H1(k r) nu(x).(y - x) / r + (k/4) H0(k r),

and is split as ``A + B log(4 sin^2((tau - tau')/2))`` in any smooth
2*pi-parameter, with

    B = (ik / 4pi) J0(kr) - (k / 4pi) J1(kr) nu(x).(y - x) / r.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .geometry import ScatteringConfig
from .specfun import EULER_GAMMA, hankel1_seq, jy01

FOUR_PI = 4.0 * math.pi


class SolverError(RuntimeError):
    """Dense linear solve failed or the system is numerically singular."""

    def __init__(self, msg, condition=None):
        super().__init__(msg if condition is None else f"{msg} (condition ~ {condition:.3e})")
        self.condition = condition


class TruncationError(RuntimeError):
    """Series evaluation hit saturated Hankel values before converging."""


# ---------------------------------------------------------------------------
# pointwise kernel
# ---------------------------------------------------------------------------

@numba.njit(cache=True)
def _kernel_parts(k, xi, yi, nxi, nyi, xj, yj):
    """Full kernel value K and log coefficient B off the diagonal."""
    dx = xj - xi
    dy = yj - yi
    r = math.sqrt(dx * dx + dy * dy)
    j0, j1, y0, y1 = jy01(k * r)
    nr = (nxi * dx + nyi * dy) / r
    h0 = j0 + 1j * y0
    h1 = j1 + 1j * y1
    full = 0.25j * k * h1 * nr + 0.25 * k * h0
    logc = (1j * k * j0 - k * j1 * nr) / FOUR_PI
    return full, logc


@numba.njit(cache=True)
def _diag_parts(k, kappa, speed):
    """Smooth part A and log coefficient B at coincident points.

    ``speed`` is |dx/dtau| of the parameterization carrying the split.
    """
    smooth = (-kappa / FOUR_PI + 0.25 * k
              + 1j * k / (2.0 * math.pi) * (math.log(0.5 * k * speed) + EULER_GAMMA))
    return smooth, 1j * k / FOUR_PI


@numba.njit(cache=True)
def _fill_rows(r0, r1, k, px, py, nx, ny, kappa, speed, h, panel, loc, npan,
               roff, rtab, out):
    """Rows r0..r1-1 of the discrete operator for D' - ikS.

    Nodes are grouped in panels, each a 2*pi-periodic trapezoid grid in
    its own parameter (``loc`` is the index on that grid, ``npan`` its
    size, ``h`` its spacing).  Same-panel pairs use the log-split rule
    with weights ``rtab[roff[p] + (l - l') mod n]``; other pairs use the
    plain trapezoid rule.  Column j carries the factor speed[j].
    """
    n = px.size
    for i in range(r0, r1):
        row = out[i - r0]
        pi_ = panel[i]
        for j in range(n):
            if panel[j] == pi_:
                m = npan[j]
                d = (loc[i] - loc[j]) % m
                rw = rtab[roff[pi_] + d]
                if i == j:
                    smooth, logc = _diag_parts(k, kappa[i], speed[i])
                    row[j] = (rw * logc + h[j] * smooth) * speed[j]
                else:
                    full, logc = _kernel_parts(k, px[i], py[i], nx[i], ny[i], px[j], py[j])
                    sn = math.sin(math.pi * d / m)
                    lg = math.log(4.0 * sn * sn)
                    row[j] = (rw * logc + h[j] * (full - logc * lg)) * speed[j]
            else:
                full, _ = _kernel_parts(k, px[i], py[i], nx[i], ny[i], px[j], py[j])
                row[j] = h[j] * full * speed[j]


@numba.njit(cache=True)
def _kernel_grid(k, xs, ys, nxs, nys, xt, yt, full_out, log_out):
    for i in range(xs.size):
        for j in range(xt.size):
            f, b = _kernel_parts(k, xs[i], ys[i], nxs[i], nys[i], xt[j], yt[j])
            full_out[i, j] = f
            log_out[i, j] = b


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def incident_rhs(config: ScatteringConfig, s):
    """Right-hand side du_inc/dnu - ik u_inc at arc lengths s."""
    pts, nrm, _ = config.curve.frame(s)
    a = config.alpha
    k = config.k
    return 1j * k * (nrm @ a - 1.0) * np.exp(1j * k * (pts @ a))


@dataclass(frozen=True)
class KernelSplit:
    """Kernel of D' - ikS at (s, t) as ``smooth + log * log(4 sin^2(pi (s - t) / L))``."""

    smooth: complex
    log: complex
    full: complex | None  # direct kernel value (None on the diagonal)


def cfie_kernel_split(config: ScatteringConfig, s: float, t: float) -> KernelSplit:
    """Smooth/log split of the D' - ikS kernel in arc length (the 1/2 I term excluded)."""
    curve = config.curve
    L = curve.length
    k = config.k
    d = np.mod(s - t, L)
    if d == 0.0:
        kap = float(curve.curvature(np.array(s)))
        smooth, logc = _diag_parts(k, kap, L / (2.0 * math.pi))
        return KernelSplit(complex(smooth), complex(logc), None)
    p, n, _ = curve.frame(np.array([s, t]))
    full, logc = _kernel_parts(k, p[0, 0], p[0, 1], n[0, 0], n[0, 1], p[1, 0], p[1, 1])
    lg = math.log(4.0 * math.sin(math.pi * d / L) ** 2)
    return KernelSplit(complex(full - logc * lg), complex(logc), complex(full))


def kernel_matrix(config: ScatteringConfig, s, t):
    """Direct kernel values and log coefficients on the grid s x t (s != t)."""
    ps, ns, _ = config.curve.frame(np.asarray(s, dtype=float))
    pt, _, _ = config.curve.frame(np.asarray(t, dtype=float))
    full = np.empty((ps.shape[0], pt.shape[0]), dtype=complex)
    logc = np.empty_like(full)
    _kernel_grid(config.k, ps[:, 0].copy(), ps[:, 1].copy(), ns[:, 0].copy(), ns[:, 1].copy(),
                 pt[:, 0].copy(), pt[:, 1].copy(), full, logc)
    return full, logc


def kress_log_weights(n: int) -> np.ndarray:
    """Weights R_j, j = 0..n-1, for the log(4 sin^2((t - tau)/2)) periodic rule.

    ``sum_j R_{(i-j) mod n} g(t_j)`` is exact for trigonometric polynomials
    g of degree < n/2 on the grid t_j = 2 pi j / n.
    """
    n = int(n)
    if n < 4 or n % 2:
        raise ValueError("log-quadrature needs an even node count >= 4")
    m = np.arange(n)
    a = np.zeros(n)
    mm = np.minimum(m, n - m)
    sel = (mm > 0) & (m != n // 2)
    a[sel] = 1.0 / mm[sel]
    sign = np.where(m % 2 == 0, 1.0, -1.0)
    return -2.0 * np.pi * np.fft.ifft(a).real * n / n - 4.0 * np.pi / n**2 * sign


def condition_estimate(lu, anorm: float) -> float:
    """1-norm condition estimate from an LU factorization (LAPACK gecon)."""
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info != 0 or rcond == 0.0:
        return math.inf
    return 1.0 / rcond


def dense_solve(matrix, rhs):
    """LU solve with partial pivoting; returns (solution, condition estimate)."""
    matrix = np.asarray(matrix, dtype=complex)
    anorm = np.abs(matrix).sum(axis=0).max()
    lu, piv = lu_factor(matrix, check_finite=True)
    if np.any(np.diag(lu) == 0):
        raise SolverError("exactly singular system", math.inf)
    cond = condition_estimate(lu, anorm)
    if not np.isfinite(cond):
        raise SolverError("numerically singular system", cond)
    return lu_solve((lu, piv), rhs), cond


@dataclass(frozen=True)
class DensityGrid:
    """Surface current sampled on a uniform arc-length grid s_j = j L / N."""

    s: np.ndarray
    values: np.ndarray
    k: float
    length: float
    condition: float = float("nan")

    @property
    def n(self) -> int:
        return self.s.size

    def evaluate(self, s, chunk: int = 2048):
        """Trigonometric interpolant of the node values at arbitrary s."""
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        n = self.n
        c = np.fft.fft(self.values) / n
        m = np.fft.fftfreq(n, 1.0 / n)
        # split the Nyquist mode symmetrically so real data stays real
        nyq = n // 2
        c_nyq = c[nyq]
        c = c.copy()
        c[nyq] = 0.0
        out = np.empty(flat.size, dtype=complex)
        w = 2.0 * np.pi / self.length
        for i in range(0, flat.size, chunk):
            ph = np.exp(1j * w * np.outer(flat[i:i + chunk], m))
            out[i:i + chunk] = ph @ c + c_nyq * np.cos(w * nyq * flat[i:i + chunk])
        return out.reshape(s.shape)

    __call__ = evaluate

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["s", "re_eta", "im_eta"])
            for s, v in zip(self.s, self.values):
                wr.writerow([f"{s:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])

    @classmethod
    def from_csv(cls, path, k: float, length: float) -> "DensityGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], float(k), float(length))


def nystrom_matrix(config: ScatteringConfig, n: int) -> np.ndarray:
    """Matrix of (1/2) I + D' - ikS on the uniform n-point arc-length grid."""
    curve = config.curve
    L = curve.length
    s = np.arange(n) * (L / n)
    pts, nrm, kap = curve.frame(s)
    speed = np.full(n, L / (2.0 * np.pi))
    h = np.full(n, 2.0 * np.pi / n)
    panel = np.zeros(n, dtype=np.int64)
    loc = np.arange(n, dtype=np.int64)
    npan = np.full(n, n, dtype=np.int64)
    out = np.empty((n, n), dtype=complex)
    _fill_rows(0, n, config.k, pts[:, 0].copy(), pts[:, 1].copy(), nrm[:, 0].copy(),
               nrm[:, 1].copy(), kap, speed, h, panel, loc, npan,
               np.zeros(1, dtype=np.int64), kress_log_weights(n), out)
    out[np.diag_indices(n)] += 0.5
    return out


def nystrom_solve(config: ScatteringConfig, n: int, min_ppw: float = 0.0) -> DensityGrid:
    """Solve the CFIE on n uniform arc-length nodes with the log-split trapezoid rule."""
    n = int(n)
    if n < 4 or n % 2:
        raise ValueError("Nystrom node count must be even and >= 4")
    ppw = n * config.wavelength / config.length
    if ppw < min_ppw:
        raise ValueError(f"{ppw:.2f} points per wavelength is below the required {min_ppw}")
    s = np.arange(n) * (config.length / n)
    mat = nystrom_matrix(config, n)
    eta, cond = dense_solve(mat, incident_rhs(config, s))
    return DensityGrid(s, eta, config.k, config.length, cond)


def nodes_for_ppw(config: ScatteringConfig, ppw: float, minimum: int = 64) -> int:
    """Even node count giving at least ``ppw`` points per wavelength."""
    n = max(minimum, int(math.ceil(ppw * config.length / config.wavelength)))
    return n + (n % 2)


def circle_series_density(k: float, radius: float, alpha, theta, n_terms: int | None = None):
    """Exact surface current on a circle of given radius centred at the origin.

    ``theta`` is the polar angle of the boundary point.  Separation of
    variables with the Wronskian J_n H_n' - J_n' H_n = 2i / (pi x) gives

        eta(theta) = -(2i / (pi a)) sum_n i^n exp(i n (theta - beta)) / H_n(ka),

    with beta the polar angle of alpha.
    """
    ka = k * radius
    if n_terms is None:
        # 1/H_n decays like exp(-c t^1.5) past n = ka + t (ka/2)^(1/3)
        n_terms = int(math.ceil(ka + 15.0 * ka ** (1.0 / 3.0))) + 30
    if n_terms < ka + 20:
        raise ValueError("n_terms must be at least ka + 20")
    alpha = np.asarray(alpha, dtype=float)
    beta = math.atan2(alpha[1], alpha[0])
    h, saturated = hankel1_seq(n_terms, ka)
    last = n_terms if saturated is None else saturated - 1
    if saturated is not None and saturated < ka + 20:
        raise TruncationError(f"Hankel values saturate at order {saturated} (ka = {ka:g})")
    inv = 1.0 / h[: last + 1]
    n = np.arange(1, last + 1)
    coef = 2.0 * (1j ** n) * inv[1:]
    theta = np.asarray(theta, dtype=float)
    flat = theta.ravel() - beta
    out = np.empty(flat.size, dtype=complex)
    for i in range(0, flat.size, 1024):
        out[i:i + 1024] = inv[0] + np.cos(np.outer(flat[i:i + 1024], n)) @ coef
    out *= -2j / (np.pi * radius)
    return out.reshape(theta.shape)[()]


def circle_reference(config: ScatteringConfig, n_terms: int | None = None):
    """Series density as a function of arc length on an anchored circle config."""
    curve = config.curve
    if curve.kind != "circle":
        raise ValueError("series reference is only available for circles")
    a = curve.params["radius"]
    beta = math.atan2(config.alpha[1], config.alpha[0])

    def eta(s):
        return circle_series_density(config.k, a, config.alpha,
                                     beta + np.asarray(s, dtype=float) / a, n_terms)

    return eta
