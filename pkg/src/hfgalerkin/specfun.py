"""Bessel and Hankel functions of the first kind for real positive arguments.

Small arguments use Miller's backward recurrence for J_n normalised by
``J_0 + 2 sum J_2k = 1`` together with the Neumann series for Y_0 and Y_1.
Large arguments use the Hankel asymptotic expansion, summed until its terms
stop decreasing.  The seam sits at ``ASYMPTOTIC_SEAM`` where the smallest
asymptotic term is already below 1e-16.

The scalar kernels are numba-compiled so that the boundary-integral
assembly loops can call them directly.
"""

import math

import numba
import numpy as np

EULER_GAMMA = 0.57721566490153286061
ASYMPTOTIC_SEAM = 18.0
SATURATION = 1e300

_TWO_OVER_PI = 2.0 / math.pi


@numba.njit(cache=True)
def _miller_start(x):
    m = int(x) + 36
    return m + (m % 2)


@numba.njit(cache=True)
def _small_jy01(x):
    """J0, J1, Y0, Y1 for 0 < x < ASYMPTOTIC_SEAM."""
    m = _miller_start(x)
    jp1 = 0.0  # J_{n+1}
    jn = 1e-30  # J_n, n = m
    norm = 0.0
    ysum0 = 0.0
    ysum1 = 0.0
    j1 = 0.0
    jn_plus2 = 0.0  # J_{n+2} once n is odd
    for n in range(m, 0, -1):
        jm1 = (2.0 * n / x) * jn - jp1  # J_{n-1}
        # jn is J_n; collect even/odd terms as they pass.
        if n % 2 == 0:
            kk = n // 2
            norm += 2.0 * jn
            sgn = 1.0 if kk % 2 == 0 else -1.0
            ysum0 += sgn * jn / kk
        else:
            # J_{2k-1} - J_{2k+1} for 2k = n + 1
            kk = (n + 1) // 2
            sgn = 1.0 if kk % 2 == 0 else -1.0
            ysum1 += sgn * (jn - jn_plus2) / kk
        if n == 1:
            j1 = jn
        jn_plus2 = jp1
        jp1 = jn
        jn = jm1
        if abs(jn) > 1e250:
            jn *= 1e-250
            jp1 *= 1e-250
            jn_plus2 *= 1e-250
            norm *= 1e-250
            ysum0 *= 1e-250
            ysum1 *= 1e-250
            j1 *= 1e-250
    j0 = jn
    norm += j0
    j0 /= norm
    j1 /= norm
    ysum0 /= norm
    ysum1 /= norm
    lg = math.log(0.5 * x) + EULER_GAMMA
    y0 = _TWO_OVER_PI * lg * j0 - 2.0 * _TWO_OVER_PI * ysum0
    y1 = _TWO_OVER_PI * (lg * j1 - j0 / x) + _TWO_OVER_PI * ysum1
    return j0, j1, y0, y1


@numba.njit(cache=True)
def _asym_h(nu, x):
    """H_nu^(1)(x) from the Hankel asymptotic series (nu = 0 or 1)."""
    mu = 4.0 * nu * nu
    term = 1.0 + 0.0j
    total = 1.0 + 0.0j
    prev = 1.0
    for m in range(1, 80):
        term *= 1j * (mu - (2 * m - 1) ** 2) / (m * 8.0 * x)
        mag = abs(term)
        if mag > prev:
            break
        total += term
        prev = mag
        if mag < 1e-17:
            break
    phase = x - 0.5 * nu * math.pi - 0.25 * math.pi
    return math.sqrt(_TWO_OVER_PI / x) * (math.cos(phase) + 1j * math.sin(phase)) * total


@numba.njit(cache=True)
def jy01(x):
    """Return (J0, J1, Y0, Y1) at x > 0."""
    if x < ASYMPTOTIC_SEAM:
        return _small_jy01(x)
    h0 = _asym_h(0, x)
    h1 = _asym_h(1, x)
    return h0.real, h1.real, h0.imag, h1.imag


@numba.njit(cache=True)
def h01(x):
    """Return (H0^(1)(x), H1^(1)(x)) at x > 0."""
    j0, j1, y0, y1 = jy01(x)
    return j0 + 1j * y0, j1 + 1j * y1


@numba.njit(cache=True)
def _hankel1_array(n, x, out):
    for i in range(x.size):
        h0, h1 = h01(x[i])
        out[i] = h0 if n == 0 else h1


@numba.njit(cache=True)
def _jy01_array(x, out):
    for i in range(x.size):
        j0, j1, y0, y1 = jy01(x[i])
        out[0, i] = j0
        out[1, i] = j1
        out[2, i] = y0
        out[3, i] = y1


def _as_positive_array(x):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise ValueError("Hankel/Bessel argument must be positive and finite")
    if np.any(~np.isfinite(arr)):
        raise ValueError("Hankel/Bessel argument must be positive and finite")
    return arr


def hankel1(n, x):
    """Hankel function of the first kind ``H_n^(1)(x)`` for n in {0, 1}.

    Accepts scalars or arrays; raises ``ValueError`` for x <= 0.
    """
    if n not in (0, 1):
        raise ValueError("hankel1 supports orders 0 and 1 only; use hankel1_seq")
    arr = _as_positive_array(x)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty(flat.size, dtype=complex)
    _hankel1_array(n, flat, out)
    out = out.reshape(arr.shape)
    return out[()] if out.ndim == 0 else out


def bessel_jy01(x):
    """Return the tuple (J0, J1, Y0, Y1) evaluated elementwise at x > 0."""
    arr = _as_positive_array(x)
    flat = np.ascontiguousarray(arr.ravel())
    out = np.empty((4, flat.size))
    _jy01_array(flat, out)
    return tuple(row.reshape(arr.shape)[()] for row in out)


@numba.njit(cache=True)
def _miller_sequence(n_max, x, jout):
    m = max(n_max, int(x)) + 30 + int(10.0 * x ** (1.0 / 3.0))
    m += m % 2
    jp1 = 0.0
    jn = 1e-30
    norm = 0.0
    for n in range(m, 0, -1):
        if n <= n_max:
            jout[n] = jn
        if n % 2 == 0:
            norm += 2.0 * jn
        jm1 = (2.0 * n / x) * jn - jp1
        jp1 = jn
        jn = jm1
        if abs(jn) > 1e250:
            jn *= 1e-250
            jp1 *= 1e-250
            norm *= 1e-250
            for i in range(n_max + 1):
                jout[i] *= 1e-250
    jout[0] = jn
    norm += jn
    for i in range(n_max + 1):
        jout[i] /= norm


def bessel_j_seq(n_max, x):
    """J_n(x) for n = 0..n_max by normalised Miller recurrence."""
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    x = float(_as_positive_array(x))
    out = np.zeros(n_max + 1)
    _miller_sequence(int(n_max), x, out)
    return out


def hankel1_seq(n_max, x):
    """Return ``(H, saturated)`` with H[n] = H_n^(1)(x), n = 0..n_max.

    Y_n follows from upward recurrence, which is stable.  Once |Y_n|
    exceeds ``SATURATION`` the remaining entries are set to ``inf`` and
    ``saturated`` holds the first affected order (``None`` otherwise);
    callers summing series in 1/H_n must stop there.
    """
    x = float(_as_positive_array(x))
    n_max = int(n_max)
    j = bessel_j_seq(n_max, x)
    _, _, y0, y1 = jy01(x)
    if x >= ASYMPTOTIC_SEAM:
        j0, j1, _, _ = jy01(x)
        j[0] = j0
        if n_max >= 1:
            j[1] = j1
    y = np.empty(n_max + 1)
    y[0] = y0
    if n_max >= 1:
        y[1] = y1
    saturated = None
    for n in range(1, n_max):
        nxt = (2.0 * n / x) * y[n] - y[n - 1]
        if not abs(nxt) < SATURATION:
            saturated = n + 1
            y[n + 1:] = -np.inf
            break
        y[n + 1] = nxt
    h = np.empty(n_max + 1, dtype=complex)
    h.real = j
    h.imag = y
    if saturated is not None:
        h[saturated:] = complex(np.inf, np.inf)
    return h, saturated
