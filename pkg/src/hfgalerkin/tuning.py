"""Coordinate search for partition parameters.

Each coordinate is nudged in increments.  A move is kept when it lowers
the error on the intervals it actually reshapes (the local error) without
raising the global error, so the recorded global objective never
increases.  After every round the increments are halved; the search stops
when a round changes the global error by less than ``rel_change`` or after
``max_rounds`` rounds.

For six-interval change-of-variables partitions the primed parameters are
tied by the equality constraints, so the free quantities are the two
meeting points: ``p_ill`` (where IT1 meets IT2) and ``p_sh`` (where ST2
meets ST1, measured in [t2, t1 + L]).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .galerkin import DEFAULT_PPW, IllConditionedWarning, error_grid, solve
from .geometry import ScatteringConfig
from .hfspaces import TRIGONOMETRIC, InfeasiblePartition, InvalidParameter, SpaceSettings
from .operators import SolverError

log = logging.getLogger(__name__)


class ErrorProbe:
    """Galerkin error against a fixed reference on a fixed grid."""

    def __init__(self, config: ScatteringConfig, reference, ppw: float = DEFAULT_PPW,
                 grid_ppw: float = 20.0, n_min: int = 4096):
        self.config = config
        self.ppw = ppw
        self.s = error_grid(config, grid_ppw, n_min)
        self.ref = np.asarray(reference(self.s))
        self.norm2 = float(np.sum(np.abs(self.ref) ** 2))
        self.evaluations = 0

    def measure(self, settings: SpaceSettings):
        """Return (global relative error, squared pointwise errors, partition)."""
        space = settings.build_space(self.config)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedWarning)
            sol = solve(space, self.ppw)
        self.evaluations += 1
        diff2 = np.abs(sol.evaluate(self.s) - self.ref) ** 2
        return math.sqrt(diff2.sum() / self.norm2), diff2, space.partition

    def local_error(self, diff2, mask) -> float:
        """Relative L2 error restricted to the grid points in ``mask``."""
        ref2 = float(np.sum(np.abs(self.ref[mask]) ** 2))
        return math.sqrt(float(diff2[mask].sum()) / ref2) if ref2 > 0 else float("inf")


@dataclass
class Coordinate:
    name: str
    value: float
    step: float
    lo: float
    hi: float


@dataclass
class TuningResult:
    settings: SpaceSettings
    error: float
    history: list = field(default_factory=list)
    evaluations: int = 0

    @property
    def objective(self) -> list:
        return [h["global_error"] for h in self.history]


def _coordinates(config: ScatteringConfig, settings: SpaceSettings, symmetric: bool,
                 meeting_points: bool, shapes: bool) -> list:
    """Search coordinates in sweep order: illuminated side, then shadow side, then PoU shape."""
    p = settings.params
    t1, t2, L = config.t1, config.t2, config.length
    ill, sh = t2 - t1, t1 + L - t2
    cov6 = settings.mode == "cov" and settings.J == 6
    cov8 = settings.mode == "cov" and settings.J == 8

    def scaled(name, value, span):
        base = value if settings.mode == "cov" else span
        return Coordinate(name, value, 0.1 * base, 0.0, span)

    coords = []
    for side, span in (("xi", ill), ("zeta", sh)):
        if symmetric:
            value = 0.5 * (getattr(p, side + "1") + getattr(p, side + "2"))
            coords.append(scaled(side, value, span))
        else:
            coords += [scaled(side + i, getattr(p, side + i), span) for i in ("1", "2")]
        if cov6 and meeting_points:
            if side == "xi":
                coords.append(Coordinate("p_ill", t1 + p.xi1p, 0.1 * ill, t1, t2))
            else:
                coords.append(Coordinate("p_sh", t2 + p.zeta2p, 0.1 * sh, t2, t1 + L))
        elif cov8:
            coords += [scaled(side + i + "p", getattr(p, side + i + "p"), span) for i in ("1", "2")]
    if shapes and settings.basis_family == TRIGONOMETRIC:
        coords += [Coordinate("overlap_c", settings.overlap_c, 0.1 * settings.overlap_c, 0.0, 20.0),
                   Coordinate("steepness", settings.steepness, 0.1 * settings.steepness, 0.0, 20.0)]
    return coords


def _apply(config: ScatteringConfig, settings: SpaceSettings, name: str, value: float):
    t1, t2, L = config.t1, config.t2, config.length
    params = settings.params
    value = float(value)
    if name in ("overlap_c", "steepness"):
        return replace(settings, **{name: value})
    if name == "xi":
        params = replace(params, xi1=value, xi2=value)
    elif name == "zeta":
        params = replace(params, zeta1=value, zeta2=value)
    elif name == "p_ill":
        params = replace(params, xi1p=value - t1, xi2p=t2 - value)
    elif name == "p_sh":
        params = replace(params, zeta2p=value - t2, zeta1p=t1 + L - value)
    else:
        params = replace(params, **{name: value})
    return replace(settings, params=params)


def _changed_region(s, old, new, name: str):
    """Grid mask covering the intervals a move reshapes, before and after the move."""
    if name in ("overlap_c", "steepness"):
        return np.ones(s.shape, dtype=bool)
    old_map = {iv.tag: (iv.a, iv.b) for iv in old.intervals}
    mask = np.zeros(s.shape, dtype=bool)
    for part in (old, new):
        idx = part.locate(s)
        for j, iv in enumerate(new.intervals):
            if old_map.get(iv.tag) != (iv.a, iv.b):
                mask |= idx == part.index(iv.tag)
    return mask


def tune_parameters(config: ScatteringConfig, settings: SpaceSettings, reference,
                    ppw: float = DEFAULT_PPW, max_rounds: int = 6, rel_change: float = 0.02,
                    max_moves: int = 6, symmetric: bool = False,
                    meeting_points: bool = True, shapes: bool = True,
                    step_fraction: float = 0.1, callback=None) -> TuningResult:
    """Tune the partition parameters of ``settings`` at ``config.k``.

    ``reference`` is a callable giving the exact (or reference) density at
    arc length values.  Returns the tuned settings together with the
    accepted-objective history.
    """
    if settings.params is None:
        part = settings.build_partition(config)
        settings = replace(settings, params=part.params)
    probe = ErrorProbe(config, reference, ppw)
    best_err, best_diff, best_part = probe.measure(settings)
    history = [{"round": 0, "coordinate": "", "value": float("nan"), "step": float("nan"),
                "global_error": best_err, "local_error": float("nan")}]
    coords = _coordinates(config, settings, symmetric, meeting_points, shapes)
    for c in coords:
        c.step *= step_fraction / 0.1

    for rnd in range(1, max_rounds + 1):
        start_err = best_err
        for c in coords:
            moved = 0
            direction = 0
            while moved < max_moves:
                candidates = [direction] if direction else [1, -1]
                accepted = False
                for sgn in candidates:
                    value = c.value + sgn * c.step
                    if not (c.lo < value < c.hi):
                        continue
                    trial = _apply(config, settings, c.name, value)
                    try:
                        err, diff2, part = probe.measure(trial)
                    except (InfeasiblePartition, InvalidParameter, SolverError) as exc:
                        log.debug("skip %s=%g: %s", c.name, value, exc)
                        continue
                    if not math.isfinite(err):
                        continue
                    mask = _changed_region(probe.s, best_part, part, c.name)
                    if not mask.any():
                        continue
                    loc_new = probe.local_error(diff2, mask)
                    if loc_new < probe.local_error(best_diff, mask) and err <= best_err:
                        c.value = value
                        settings = trial
                        best_err, best_diff, best_part = err, diff2, part
                        history.append({"round": rnd, "coordinate": c.name, "value": value,
                                        "step": c.step, "global_error": err,
                                        "local_error": loc_new})
                        if callback is not None:
                            callback(history[-1])
                        direction = sgn
                        accepted = True
                        break
                if not accepted:
                    break
                moved += 1
            c.step *= 0.5
        log.info("round %d: global error %.3e", rnd, best_err)
        if abs(start_err - best_err) <= rel_change * start_err:
            break
    return TuningResult(settings, best_err, history, probe.evaluations)
