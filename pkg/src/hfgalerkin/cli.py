"""Command-line experiment harness.

Subcommands ``solve``, ``sweep``, ``tune`` and ``geometry-info`` read a
key-value config file with one section per module::

    [geometry]
    kind = circle
    radius = 1.0
    alpha = 1, 0

    [hfspaces]
    family = alg-cov
    J = 6

    [galerkin]
    ppw = 10

    [cli]
    k = 50, 100
    degrees = 2, 4, 6, 8

Command-line flags override file keys.  Exit codes: 0 success, 2 config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .galerkin import DEFAULT_PPW, MIN_PPW, DegenerateReference, ResolutionError, error_grid, solve
from .geometry import ConsistencyError, GeometryError, illuminated_pole, make_config, make_curve
from .hfspaces import (InfeasiblePartition, InvalidParameter, PartitionParams, SpaceSettings,
                       load_settings, save_settings)
from .operators import SolverError, TruncationError, circle_reference, nodes_for_ppw, nystrom_solve
from .tuning import tune_parameters

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

DEFAULT_ALPHA = {"circle": (1.0, 0.0), "ellipse": (3.0, 1.0), "kite": (4.0, 1.0)}
GEOMETRY_PARAMS = {"circle": ("radius",), "ellipse": ("a", "b"), "kite": ()}

SCHEMA = {
    "geometry": ("kind", "radius", "a", "b", "alpha"),
    "hfspaces": ("family", "j", "m", "eps", "overlap_c", "steepness", "params",
                 "xi1", "xi2", "zeta1", "zeta2", "xi1p", "xi2p", "zeta1p", "zeta2p"),
    "galerkin": ("ppw",),
    "operators": ("reference", "reference_ppw"),
    "tuning": ("max_rounds", "rel_change", "max_moves", "step_fraction", "symmetric",
               "meeting_points", "shapes"),
    "cli": ("k", "degrees", "out", "history", "figure", "timing"),
}


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


def _fmt(x) -> str:
    return f"{x:.17g}"


def parse_list(text: str, kind=float) -> list:
    """Parse ``"1, 2 3"`` or a range ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [kind(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"bad range {text!r}")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [kind(start + i * step) for i in range(max(n, 0))]
    return [kind(v) for v in text.replace(",", " ").split()]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


class ConfigFile:
    """Sectioned key-value file that remembers the line of every key."""

    def __init__(self, path=None):
        self.path = path
        self.parser = configparser.ConfigParser()
        self.lines = {}
        if path is None:
            return
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            self.parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        section = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line[0] in "#;" or raw[0].isspace():
                continue
            if line.startswith("["):
                section = line[1:line.index("]")].strip()
                self.lines.setdefault((section, None), lineno)
            elif section is not None:
                key = line.replace(":", "=").split("=", 1)[0].strip().lower()
                self.lines[(section, key)] = lineno
        self._validate()

    def where(self, section, key=None) -> str:
        lineno = self.lines.get((section, key))
        return f"{self.path}:{lineno}" if lineno else str(self.path or "<flags>")

    def _validate(self):
        for section in self.parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"{self.where(section)}: unknown section [{section}]")
            for key in self.parser[section]:
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{self.where(section, key)}: unknown key {key!r} "
                                      f"in [{section}]")

    def get(self, section, key, convert=str, default=None):
        if not self.parser.has_option(section, key):
            return default
        text = self.parser[section][key]
        try:
            return convert(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{self.where(section, key)}: bad value for {key!r}: {exc}") from None

    def require(self, section, key, convert=str):
        if not self.parser.has_option(section, key):
            raise ConfigError(f"{self.where(section)}: missing required key {key!r} in [{section}]")
        return self.get(section, key, convert)


@dataclass
class ExperimentConfig:
    kind: str
    geometry: dict
    alpha: tuple
    settings: SpaceSettings
    ks: list
    degrees: list
    ppw: float = DEFAULT_PPW
    reference: str = "auto"
    reference_ppw: float = 20.0
    tuning: dict = field(default_factory=dict)
    out: str | None = None
    history: str | None = None
    figure: str | None = None
    timing: bool = True

    def curve(self):
        return make_curve(self.kind, **self.geometry)

    def scattering(self, k: float):
        return make_config(self.curve(), float(k), self.alpha)


def _settings(cf: ConfigFile, family_flag, params_flag) -> SpaceSettings:
    params_path = params_flag or cf.get("hfspaces", "params")
    settings = SpaceSettings()
    if params_path:
        try:
            settings = load_settings(params_path)
        except (OSError, ValueError, configparser.Error) as exc:
            raise ConfigError(f"cannot load partition parameters {params_path}: {exc}") from None
    loaded_mode = settings.mode if settings.params is not None else None
    kw = {}
    for key, attr, conv in (("family", "family", str), ("j", "J", int), ("m", "m", int),
                            ("overlap_c", "overlap_c", float), ("steepness", "steepness", float)):
        value = cf.get("hfspaces", key, conv)
        if value is not None:
            kw[attr] = value.strip() if conv is str else value
    eps = cf.get("hfspaces", "eps", parse_list)
    if eps is not None:
        kw["eps"] = tuple(eps)
    if family_flag:
        kw["family"] = family_flag
    settings = replace(settings, **kw)
    if settings.family not in SpaceSettings.FAMILIES:
        raise ConfigError(f"{cf.where('hfspaces', 'family')}: unknown family {settings.family!r}; "
                          f"choose from {', '.join(SpaceSettings.FAMILIES)}")
    if settings.mode == "cov" and settings.J not in (6, 8):
        raise ConfigError(f"{cf.where('hfspaces', 'j')}: J must be 6 or 8")
    if settings.mode == "freq" and settings.m < 1:
        raise ConfigError(f"{cf.where('hfspaces', 'm')}: m must be >= 1")
    if loaded_mode is not None and loaded_mode != settings.mode:
        raise ConfigError(f"partition parameters in {params_path} are for a {loaded_mode} "
                          f"partition, not {settings.family}")
    inline = {key: cf.get("hfspaces", key, float)
              for key in ("xi1", "xi2", "zeta1", "zeta2", "xi1p", "xi2p", "zeta1p", "zeta2p")}
    inline = {key: v for key, v in inline.items() if v is not None}
    if inline:
        base = settings.params or PartitionParams(0.0, 0.0, 0.0, 0.0)
        settings = replace(settings, params=replace(base, **inline))
    return settings


def load_experiment(path=None, args=None) -> ExperimentConfig:
    """Read a config file and apply command-line overrides."""
    cf = ConfigFile(path)
    get = lambda name: getattr(args, name, None) if args is not None else None  # noqa: E731
    kind = cf.require("geometry", "kind").strip()
    if kind not in GEOMETRY_PARAMS:
        raise ConfigError(f"{cf.where('geometry', 'kind')}: unknown geometry kind {kind!r}")
    geometry = {key: cf.require("geometry", key, float) for key in GEOMETRY_PARAMS[kind]}
    alpha = cf.get("geometry", "alpha", parse_list, list(DEFAULT_ALPHA[kind]))
    if len(alpha) != 2 or not math.hypot(*alpha) > 0:
        raise ConfigError(f"{cf.where('geometry', 'alpha')}: alpha must be a nonzero 2-vector")
    norm = math.hypot(*alpha)
    alpha = (alpha[0] / norm, alpha[1] / norm)

    settings = _settings(cf, get("family"), get("params"))

    ks = parse_list(get("k")) if get("k") else cf.get("cli", "k", parse_list, [])
    degrees = (parse_list(get("degrees"), int) if get("degrees")
               else cf.get("cli", "degrees", lambda t: parse_list(t, int), None))
    if degrees is None:
        degrees = [settings.degrees] if np.isscalar(settings.degrees) else list(settings.degrees)
    ppw = float(get("ppw")) if get("ppw") is not None else cf.get("galerkin", "ppw", float,
                                                                   DEFAULT_PPW)
    if any(not k > 0 for k in ks):
        raise ConfigError(f"{cf.where('cli', 'k')}: wavenumbers must be positive")
    if any(d < 0 for d in degrees):
        raise ConfigError(f"{cf.where('cli', 'degrees')}: degrees must be nonnegative")
    if settings.basis_family == "trigonometric" and any(d % 2 for d in degrees):
        raise ConfigError(f"{cf.where('cli', 'degrees')}: trigonometric families need even degrees")
    if ppw < MIN_PPW:
        raise ConfigError(f"{cf.where('galerkin', 'ppw')}: ppw must be >= {MIN_PPW}, got {ppw:g}")

    reference = cf.get("operators", "reference", str, "auto").strip()
    if reference not in ("auto", "series", "nystrom"):
        raise ConfigError(f"{cf.where('operators', 'reference')}: reference must be auto, "
                          "series or nystrom")
    if reference == "series" and kind != "circle":
        raise ConfigError(f"{cf.where('operators', 'reference')}: the series reference "
                          "needs a circle")
    reference_ppw = cf.get("operators", "reference_ppw", float, 20.0)
    if reference_ppw < 12:
        raise ConfigError(f"{cf.where('operators', 'reference_ppw')}: reference_ppw must be >= 12")

    tuning = {}
    for key, conv in (("max_rounds", int), ("rel_change", float), ("max_moves", int),
                      ("step_fraction", float), ("symmetric", _parse_bool),
                      ("meeting_points", _parse_bool), ("shapes", _parse_bool)):
        value = cf.get("tuning", key, conv)
        if value is not None:
            tuning[key] = value

    timing = cf.get("cli", "timing", _parse_bool, True)
    if get("no_timing"):
        timing = False
    return ExperimentConfig(
        kind=kind, geometry=geometry, alpha=alpha, settings=settings, ks=ks, degrees=degrees,
        ppw=ppw, reference=reference, reference_ppw=reference_ppw, tuning=tuning,
        out=get("out") or cf.get("cli", "out"), history=get("history") or cf.get("cli", "history"),
        figure=get("figure") or cf.get("cli", "figure"), timing=timing)


def make_reference(exp: ExperimentConfig, config):
    """Series density on circles, a fine Nystrom solve otherwise."""
    if exp.reference == "series" or (exp.reference == "auto" and exp.kind == "circle"):
        return circle_reference(config)
    n = nodes_for_ppw(config, exp.reference_ppw, minimum=256)
    return nystrom_solve(config, n)


def _single_k(exp: ExperimentConfig) -> float:
    if len(exp.ks) != 1:
        raise ConfigError(f"this command needs exactly one wavenumber, got {len(exp.ks)}")
    return exp.ks[0]


def _solve_degrees(exp: ExperimentConfig, n_intervals: int):
    if len(exp.degrees) == 1:
        return int(exp.degrees[0])
    if len(exp.degrees) == n_intervals:
        return tuple(int(d) for d in exp.degrees)
    raise ConfigError(f"give one degree or {n_intervals} per-interval degrees, "
                      f"got {len(exp.degrees)}")


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def run_errors(solution, reference, config):
    """Global and shadow relative L2 errors on the shared evaluation grid."""
    s = error_grid(config)
    ref = np.asarray(reference(s))
    diff = solution.evaluate(s) - ref
    shadow = config.in_shadow(s)
    norm, norm_sh = np.linalg.norm(ref), np.linalg.norm(ref[shadow])
    if not (norm > 0 and norm_sh > 0):
        raise DegenerateReference("reference density vanishes on the error grid")
    return float(np.linalg.norm(diff) / norm), float(np.linalg.norm(diff[shadow]) / norm_sh)


def cmd_solve(exp: ExperimentConfig) -> int:
    k = _single_k(exp)
    config = exp.scattering(k)
    settings = exp.settings.with_degree(_solve_degrees(exp, exp.settings.n_intervals))
    space = settings.build_space(config)
    solution = solve(space, exp.ppw)
    reference = make_reference(exp, config)
    g_err, sh_err = run_errors(solution, reference, config)

    s = error_grid(config)
    eta, ref = solution.evaluate(s), np.asarray(reference(s))
    fh, close = _open_out(exp.out)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "re_eta", "im_eta", "re_ref", "im_ref"])
        for row in zip(s, eta, ref):
            writer.writerow([_fmt(row[0]), _fmt(row[1].real), _fmt(row[1].imag),
                             _fmt(row[2].real), _fmt(row[2].imag)])
    finally:
        if close:
            fh.close()
    print(f"global_relerr={_fmt(g_err)} shadow_relerr={_fmt(sh_err)} dof={space.dimension}",
          file=sys.stderr if exp.out in (None, "-") else sys.stdout)
    return EXIT_OK


SWEEP_COLUMNS = ["k", "d", "dof", "global_relerr", "shadow_relerr", "wall_seconds"]


def sweep_rows(exp: ExperimentConfig) -> list:
    """One row per (k, d), sorted by k then d."""
    if not exp.ks:
        raise ConfigError("sweep needs at least one wavenumber")
    rows = []
    for k in sorted(set(exp.ks)):
        config = exp.scattering(k)
        reference = make_reference(exp, config)
        for d in sorted(set(int(d) for d in exp.degrees)):
            t0 = time.perf_counter()
            space = exp.settings.with_degree(d).build_space(config)
            solution = solve(space, exp.ppw)
            g_err, sh_err = run_errors(solution, reference, config)
            wall = time.perf_counter() - t0 if exp.timing else 0.0
            log.info("k=%g d=%d dof=%d global=%.3e shadow=%.3e", k, d, space.dimension,
                     g_err, sh_err)
            rows.append({"k": float(k), "d": d, "dof": space.dimension, "global_relerr": g_err,
                         "shadow_relerr": sh_err, "wall_seconds": wall})
    return rows


def write_sweep(rows, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r["k"]), r["d"], r["dof"], _fmt(r["global_relerr"]),
                         _fmt(r["shadow_relerr"]), _fmt(r["wall_seconds"])])


def cmd_sweep(exp: ExperimentConfig) -> int:
    rows = sweep_rows(exp)
    fh, close = _open_out(exp.out)
    try:
        write_sweep(rows, fh)
    finally:
        if close:
            fh.close()
    if exp.figure:
        try:
            from .plotting import plot_sweep
        except ImportError as exc:
            raise ConfigError(f"--figure needs matplotlib ({exc})") from None
        plot_sweep(rows, exp.figure, title=f"{exp.kind}, {exp.settings.family}")
    return EXIT_OK


HISTORY_COLUMNS = ["round", "param_name", "value", "local_err", "global_err"]


def cmd_tune(exp: ExperimentConfig) -> int:
    k = _single_k(exp)
    config = exp.scattering(k)
    settings = exp.settings.with_degree(_solve_degrees(exp, exp.settings.n_intervals))
    reference = make_reference(exp, config)
    result = tune_parameters(config, settings, reference, ppw=exp.ppw, **exp.tuning)
    out = exp.out or "tuned.ini"
    history = exp.history or os.path.splitext(out)[0] + "_history.csv"
    save_settings(out, result.settings)
    with open(history, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS)
        for h in result.history:
            writer.writerow([h["round"], h["coordinate"] or "initial", _fmt(h["value"]),
                             _fmt(h["local_error"]), _fmt(h["global_error"])])
    print(f"tuned global_relerr={_fmt(result.error)} after {result.evaluations} solves; "
          f"wrote {out} and {history}")
    return EXIT_OK


def cmd_geometry_info(exp: ExperimentConfig) -> int:
    k = exp.ks[0] if exp.ks else 1.0
    config = exp.scattering(k)
    lines = [("kind", exp.kind), ("alpha", f"{_fmt(exp.alpha[0])}, {_fmt(exp.alpha[1])}"),
             ("length", _fmt(config.length)), ("t1", _fmt(config.t1)), ("t2", _fmt(config.t2)),
             ("illuminated_pole", _fmt(illuminated_pole(config.curve, config.alpha,
                                                       config.t1, config.t2)))]
    for key, value in exp.geometry.items():
        lines.insert(1, (key, _fmt(value)))
    fh, close = _open_out(exp.out)
    try:
        for key, value in lines:
            fh.write(f"{key} = {value}\n")
        if exp.ks:
            part = exp.settings.build_partition(config)
            fh.write(f"k = {_fmt(k)}\nfamily = {exp.settings.family}\n")
            fh.write("tag,a,b,width,kind\n")
            for iv in part.intervals:
                fh.write(f"{iv.tag},{_fmt(iv.a)},{_fmt(iv.b)},{_fmt(iv.width)},{iv.kind}\n")
    finally:
        if close:
            fh.close()
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "tune": cmd_tune,
            "geometry-info": cmd_geometry_info}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hfgalerkin",
                                     description="Galerkin BEM for high-frequency sound-soft "
                                                 "scattering with change-of-variables spaces.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config file")
        p.add_argument("--out", help="output path ('-' for stdout)")
        p.add_argument("--ppw", type=float, help="quadrature points per wavelength (>= 6)")
        p.add_argument("--family", choices=SpaceSettings.FAMILIES)
        p.add_argument("--k", help="wavenumber list, e.g. '50,100' or '50:400:50'")
        p.add_argument("--degrees", help="degree list, e.g. '2,4,6' or '2:12:2'")
        p.add_argument("--params", help="partition parameter file from 'tune'")
        if name == "sweep":
            p.add_argument("--figure", help="also save an error-vs-degree figure")
            p.add_argument("--no-timing", action="store_true",
                           help="write 0 in wall_seconds for byte-reproducible output")
        if name == "tune":
            p.add_argument("--history", help="objective history CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = load_experiment(args.config, args)
        return COMMANDS[args.command](exp)
    except (ConfigError, GeometryError, InfeasiblePartition, InvalidParameter,
            ResolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, TruncationError, ConsistencyError, DegenerateReference,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
