"""Galerkin discretisation of the CFIE over oscillation-weighted spaces.

Each partition interval is one quadrature panel.  Inside a panel the
pre-image variable is graded with a sigmoidal map so that all integrand
derivatives vanish at the panel ends; the panel then behaves like a
periodic interval and the log-split trapezoid rule applies to the
singular self-interactions.  Transition panels are additionally pushed
through their change of variables, so quadrature nodes cluster where the
basis functions vary fastest.

The same nodes serve as outer (trapezoid) and inner (log-split) rules::

    M = B^H W (B / 2 + A B),   F = B^H W f

with ``B`` the basis values at the nodes, ``W`` the quadrature weights and
``A`` the discrete operator D' - ikS.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .geometry import ScatteringConfig
from .hfspaces import ALGEBRAIC, GalerkinSpace
from .operators import (SolverError, _fill_rows, dense_solve, incident_rhs,
                        kress_log_weights)

MIN_PPW = 6.0
DEFAULT_PPW = 10.0
GRADING_STEEPNESS = 1.0
END_TRIM = 1e-13
RESIDUAL_TOL = 1e-10
CONDITION_WARN = 1e12


class ResolutionError(ValueError):
    """Requested quadrature density is too low to trust the result."""


class DegenerateReference(ValueError):
    """Reference density has zero norm over the requested region."""


class IllConditionedWarning(UserWarning):
    """Galerkin matrix condition estimate exceeds CONDITION_WARN."""


def sigmoid_grading(tau, steepness: float = GRADING_STEEPNESS, complement: bool = False):
    """Sigmoidal map w of (0, 2 pi) onto itself and its derivative.

    ``w = 2 pi / (1 + exp(g))`` with ``g = b (2 pi / tau - 2 pi / (2 pi - tau))``.
    Every derivative of w vanishes at both ends, so the graded trapezoid
    rule converges faster than any power of the node count for integrands
    that are merely smooth up to the panel ends.  With ``complement`` the
    tuple also holds 2 pi - w, computed without cancellation so that nodes
    near the right end keep their offsets.
    """
    x = np.asarray(tau, dtype=float) / (2 * np.pi)
    g = steepness * (1.0 / x - 1.0 / (1.0 - x))
    w, wc = expit(-g), expit(g)
    dw = w * wc * steepness * (1.0 / x ** 2 + 1.0 / (1.0 - x) ** 2)
    if complement:
        return 2 * np.pi * w, dw, 2 * np.pi * wc
    return 2 * np.pi * w, dw


@dataclass(frozen=True)
class PanelRule:
    """Quadrature nodes grouped by partition interval.

    ``s`` are arc lengths, ``u`` the pre-image values, ``speed`` is ds/dtau
    and ``h`` the trapezoid spacing in the local panel parameter tau.
    """

    s: np.ndarray
    u: np.ndarray
    speed: np.ndarray
    h: np.ndarray
    panel: np.ndarray
    loc: np.ndarray
    npan: np.ndarray
    roff: np.ndarray
    rtab: np.ndarray
    sizes: tuple
    counts: tuple
    clustered: bool

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def weights(self) -> np.ndarray:
        return self.h * self.speed

    def panel_slice(self, j: int) -> slice:
        start = sum(self.counts[:j])
        return slice(start, start + self.counts[j])


def panel_sizes(space: GalerkinSpace, ppw: float = DEFAULT_PPW, n_min: int | None = None):
    """Trapezoid size per panel: ppw nodes per wavelength, at least ``n_min``."""
    lam = space.config.wavelength
    dmax = max(space.degrees)
    floor = n_min if n_min is not None else max(48, 4 * (dmax + 1))
    sizes = []
    for iv in space.partition.intervals:
        n = max(floor, int(math.ceil(ppw * iv.width / lam)) + 1)
        sizes.append(n + n % 2)
    return tuple(sizes)


def panel_rule(space: GalerkinSpace, ppw: float = DEFAULT_PPW, grading: float = GRADING_STEEPNESS,
               clustered: bool = True, n_min: int | None = None) -> PanelRule:
    """Graded panel quadrature on the partition of ``space``.

    With ``clustered`` the grading acts on the pre-image variable of the
    transition intervals; otherwise it acts on arc length directly and the
    basis needs the inverse change of variables at every node.
    """
    sizes = panel_sizes(space, ppw, n_min)
    # nodes closer to a panel end than this carry negligible weight and would
    # be indistinguishable from the end point in floating point
    trim = END_TRIM * space.partition.length
    parts = {key: [] for key in ("s", "u", "speed", "h", "panel", "loc", "npan", "rtab")}
    roff, counts = [], []
    offset = 0
    for j, (iv, n) in enumerate(zip(space.partition.intervals, sizes)):
        loc = np.arange(1, n)
        tau = 2 * np.pi * loc / n
        w, dw, wc = sigmoid_grading(tau, grading, complement=True)
        left = tau <= np.pi
        gap = iv.width * np.where(left, w, wc) / (2 * np.pi)
        keep = gap > trim
        x = np.where(left, iv.a + gap, iv.b - gap)[keep]
        dx = (iv.width * dw / (2 * np.pi))[keep]
        loc = loc[keep]
        if clustered and iv.mapped:
            s, ds = iv.from_preimage(x)
            u = x
        else:
            s, ds = x, np.ones_like(x)
            u = iv.to_preimage(np.clip(x, iv.a, iv.b)) if iv.mapped else x
        m = loc.size
        parts["s"].append(s)
        parts["u"].append(u)
        parts["speed"].append(ds * dx)
        parts["h"].append(np.full(m, 2 * np.pi / n))
        parts["panel"].append(np.full(m, j))
        parts["loc"].append(loc)
        parts["npan"].append(np.full(m, n))
        parts["rtab"].append(kress_log_weights(n))
        roff.append(offset)
        counts.append(m)
        offset += n
    cat = {key: np.concatenate(val) for key, val in parts.items()}
    return PanelRule(s=cat["s"], u=cat["u"], speed=cat["speed"], h=cat["h"],
                     panel=cat["panel"].astype(np.int64), loc=cat["loc"].astype(np.int64),
                     npan=cat["npan"].astype(np.int64), roff=np.array(roff, dtype=np.int64),
                     rtab=cat["rtab"], sizes=sizes, counts=tuple(counts), clustered=clustered)


def basis_at_nodes(space: GalerkinSpace, rule: PanelRule) -> np.ndarray:
    """Basis values (with the oscillatory weight) at the rule nodes, shape (n, dim)."""
    J = len(space.degrees)
    out = np.zeros((rule.n, space.dimension), dtype=complex)
    for j in range(J):
        sl = rule.panel_slice(j)
        s = rule.s[sl]
        if space.family == ALGEBRAIC:
            out[sl, space.indices(j)] = space.local_values(j, rule.u[sl])
            continue
        for jj in {(j - 1) % J, j, (j + 1) % J}:
            u = rule.u[sl] if jj == j else None
            out[sl, space.indices(jj)] = space.block_values(jj, s, u=u)
    return out * space.weight(rule.s)[:, None]


@dataclass
class GalerkinSystem:
    space: GalerkinSpace
    matrix: np.ndarray
    rhs: np.ndarray
    rule: PanelRule
    ppw: float

    @property
    def dimension(self) -> int:
        return self.rhs.size

    def to_csv(self, path) -> None:
        """Dump matrix entries as ``i, j, re, im`` rows followed by ``i, -1, re, im`` for F."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "re", "im"])
            n = self.dimension
            for i in range(n):
                for j in range(n):
                    v = self.matrix[i, j]
                    writer.writerow([i, j, f"{v.real:.17g}", f"{v.imag:.17g}"])
            for i, v in enumerate(self.rhs):
                writer.writerow([i, -1, f"{v.real:.17g}", f"{v.imag:.17g}"])


def operator_times(config: ScatteringConfig, rule: PanelRule, columns: np.ndarray,
                   block: int = 256) -> np.ndarray:
    """Discrete (D' - ikS) applied to ``columns`` (values at the rule nodes)."""
    pts, nrm, kappa = config.curve.frame(rule.s)
    args = (config.k, np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
            np.ascontiguousarray(nrm[:, 0]), np.ascontiguousarray(nrm[:, 1]),
            np.ascontiguousarray(kappa), rule.speed, rule.h, rule.panel, rule.loc,
            rule.npan, rule.roff, rule.rtab)
    n = rule.n
    out = np.empty((n, columns.shape[1]), dtype=complex)
    buf = np.empty((min(block, n), n), dtype=complex)
    for r0 in range(0, n, block):
        r1 = min(n, r0 + block)
        rows = buf[: r1 - r0]
        _fill_rows(r0, r1, *args, rows)
        out[r0:r1] = rows @ columns
    return out


def gram_matrix(space: GalerkinSpace, rule: PanelRule) -> np.ndarray:
    """Discrete L2 inner products of the basis; M = G / 2 + (operator part)."""
    basis = basis_at_nodes(space, rule)
    return (rule.weights[:, None] * basis.conj()).T @ basis


def assemble(space: GalerkinSpace, ppw: float = DEFAULT_PPW, grading: float = GRADING_STEEPNESS,
             clustered: bool = True, n_min: int | None = None, block: int = 256) -> GalerkinSystem:
    """Galerkin matrix and load vector; refuses ``ppw`` below ``MIN_PPW``."""
    if not ppw >= MIN_PPW:
        raise ResolutionError(f"{ppw} points per wavelength is below the minimum {MIN_PPW}")
    rule = panel_rule(space, ppw, grading, clustered, n_min)
    basis = basis_at_nodes(space, rule)
    applied = operator_times(space.config, rule, basis, block)
    weighted = rule.weights[:, None] * basis.conj()
    matrix = weighted.T @ (0.5 * basis + applied)
    rhs = weighted.T @ incident_rhs(space.config, rule.s)
    return GalerkinSystem(space, matrix, rhs, rule, ppw)


@dataclass
class DensitySolution:
    """Galerkin approximation of the surface current."""

    space: GalerkinSpace
    coeffs: np.ndarray
    condition: float
    residual: float
    ppw: float

    @property
    def config(self) -> ScatteringConfig:
        return self.space.config

    @property
    def dimension(self) -> int:
        return self.coeffs.size

    def evaluate(self, s, chunk: int = 8192):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty(s.size, dtype=complex)
        for i in range(0, s.size, chunk):
            out[i:i + chunk] = self.space.evaluate(self.coeffs, s[i:i + chunk])
        return out

    __call__ = evaluate

    def coefficients_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "re", "im"])
            for i, v in enumerate(self.coeffs):
                writer.writerow([i, f"{v.real:.17g}", f"{v.imag:.17g}"])

    def to_csv(self, path, n: int | None = None) -> None:
        """Dump s, Re eta, Im eta on a uniform grid (default 20 points per wavelength)."""
        cfg = self.config
        if n is None:
            n = max(1024, int(math.ceil(20 * cfg.length / cfg.wavelength)))
        s = np.arange(n) * (cfg.length / n)
        eta = self.evaluate(s)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "re_eta", "im_eta"])
            for si, ei in zip(s, eta):
                writer.writerow([f"{si:.17g}", f"{ei.real:.17g}", f"{ei.imag:.17g}"])


def solve_system(system: GalerkinSystem) -> DensitySolution:
    """Dense LU solve with residual check and condition warning."""
    coeffs, cond = dense_solve(system.matrix, system.rhs)
    if not np.all(np.isfinite(coeffs)):
        raise SolverError("non-finite Galerkin coefficients", cond)
    residual = np.linalg.norm(system.matrix @ coeffs - system.rhs) / np.linalg.norm(system.rhs)
    if residual > RESIDUAL_TOL:
        raise SolverError(f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL}", cond)
    if cond > CONDITION_WARN:
        warnings.warn(f"Galerkin matrix condition estimate {cond:.3e}", IllConditionedWarning,
                      stacklevel=2)
    return DensitySolution(system.space, coeffs, cond, residual, system.ppw)


def solve(space: GalerkinSpace, ppw: float = DEFAULT_PPW, **kwargs) -> DensitySolution:
    """Assemble and solve in one call."""
    return solve_system(assemble(space, ppw, **kwargs))


def error_grid(config: ScatteringConfig, ppw: float = 20.0, n_min: int = 4096) -> np.ndarray:
    """Uniform midpoint grid used for L2 error norms."""
    n = max(n_min, int(math.ceil(ppw * config.length / config.wavelength)))
    return (np.arange(n) + 0.5) * (config.length / n)


def relative_l2_error(approx, reference, config: ScatteringConfig, region: str = "global",
                      ppw: float = 20.0, n_min: int = 4096) -> float:
    """||approx - reference|| / ||reference|| in L2 over the boundary or the shadow arc.

    ``approx`` and ``reference`` are callables of arc length (solutions,
    density grids or plain functions).  The integral uses the midpoint rule
    on a uniform grid of at least ``ppw`` points per wavelength.
    """
    s = error_grid(config, ppw, n_min)
    if region == "shadow":
        s = s[config.in_shadow(s)]
    elif region != "global":
        raise ValueError(f"unknown region {region!r}")
    ref = np.asarray(reference(s))
    norm = np.linalg.norm(ref)
    if not norm > 0:
        raise DegenerateReference(f"reference has zero norm over the {region} region")
    diff = np.asarray(approx(s)) - ref
    return float(np.linalg.norm(diff) / norm)


def interval_errors(solution: DensitySolution, reference, ppw: float = 20.0,
                    n_min: int = 4096) -> dict:
    """Squared absolute L2 error per partition interval tag, plus the squared reference norm."""
    cfg = solution.config
    s = error_grid(cfg, ppw, n_min)
    ref = np.asarray(reference(s))
    diff2 = np.abs(solution.evaluate(s) - ref) ** 2
    idx = solution.space.partition.locate(s)
    out = {iv.tag: float(diff2[idx == j].sum())
           for j, iv in enumerate(solution.space.partition.intervals)}
    out["_norm"] = float((np.abs(ref) ** 2).sum())
    return out
