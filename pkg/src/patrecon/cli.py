"""Command-line interface: ``patrecon <command> [options]``.

Every output file gets a ``<file>.manifest`` of flat ``key=value`` lines
recording the parameters, seed, code version, timing and wave-evaluation
counts.  Exit codes: 0 success, 1 check failure, 2 usage or input error,
3 constraint violation, 4 resource refusal.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from contextlib import nullcontext
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.fft

from . import io
from .acoustic import DEFAULT_MEMORY_BUDGET
from .checks import FAULTS, run_checks
from .errors import ConstraintViolation, InvalidInput, MemoryBudgetExceeded, PatbError, PatError
from .experiments import (GEOMETRY_ALIASES, PRESETS, Circle, NoiseModel, Phantom, Rectangle,
                          StudySetup, condition_study, cross_section, make_phantom,
                          relative_error, resample_field, resample_time, run_study,
                          simulate_data)
from .grid import GridSpec
from .sensors import SensorArray, TimeAxis, sensor_layout
from .smoothing import BACKENDS, MaternParams, SmoothingConfig
from .solver import ReconConfig, map_to_tikhonov, reconstruct
from .wavelet import WaveletSpec

log = logging.getLogger("patrecon")

BACKEND_ALIASES = {"fourier": "fourier", "wavelet": "wavelet", "dense": "dense_kernel",
                   "dense_kernel": "dense_kernel"}


class UsageError(InvalidInput):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _base_manifest(command: str, args: argparse.Namespace) -> Dict[str, object]:
    skip = {"func", "config", "log_level"}
    entries: Dict[str, object] = {"command": command, "version": _version()}
    for k, v in sorted(vars(args).items()):
        if k not in skip:
            entries[f"param.{k}"] = v if not isinstance(v, list) else ";".join(map(str, v))
    return entries


def _budget(args) -> int:
    return int(args.memory_budget_gib * 2**30)


def _grid(n: int, args, pad: Optional[int] = None) -> GridSpec:
    return GridSpec(n, args.size, args.speed, pad if pad is not None else args.pad)


def _floats(text: str, count: int, what: str) -> List[float]:
    parts = text.split(",")
    if len(parts) != count:
        raise UsageError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"{what} has a non-numeric entry: {text!r}") from None


# ---------------------------------------------------------------- commands

def cmd_phantom(args) -> int:
    shapes = []
    for c in args.circle or []:
        x, y, r, v = _floats(c, 4, "--circle")
        shapes.append(Circle((x, y), r, v))
    for c in args.rect or []:
        x, y, w, h, v = _floats(c, 5, "--rect")
        shapes.append(Rectangle((x, y), w, h, v))
    if shapes and args.preset:
        base = PRESETS[args.preset]
        phantom = Phantom(base.shapes + tuple(shapes), args.background)
    elif shapes:
        phantom = Phantom(tuple(shapes), args.background)
    else:
        phantom = Phantom(PRESETS[args.preset or "paper-like"].shapes, args.background)
    t0 = time.perf_counter()
    field = make_phantom(_grid(args.n, args), phantom)
    io.write_field(field, args.out)
    m = _base_manifest("phantom", args)
    m.update({"kind": "field", "n": args.n, "shapes": len(phantom.shapes),
              "seconds": f"{time.perf_counter() - t0:.3f}"})
    io.write_manifest(args.out, m)
    print(f"wrote {args.out} ({args.n}x{args.n}, {len(phantom.shapes)} shapes)")
    return 0


def _sensor_count(text: str, geometry: str, grid: GridSpec) -> int:
    if text in ("all", "full"):
        return 4 * grid.n - 4 if geometry in ("full_view", "incremental") else (
            grid.n if geometry == "one_sided" else 2 * grid.n - 1)
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--sensors must be an integer or 'full', got {text!r}") from None


def cmd_simulate(args) -> int:
    p0 = io.read_field(args.input, pad_factor=args.pad)
    grid = p0.grid
    if args.geometry is not None:
        geometry = GEOMETRY_ALIASES[args.geometry]
    else:
        geometry = "full_view" if args.sensors in ("all", "full") else "two_sided"
    recon_n = grid.n if args.same_grid else args.recon_n
    if not args.same_grid and not args.allow_inverse_crime and grid.n < 2 * recon_n:
        raise UsageError(
            f"simulation grid n={grid.n} is not at least twice the reconstruction grid "
            f"n={recon_n}; pass --same-grid or --allow-inverse-crime to override"
        )
    count = _sensor_count(args.sensors, geometry, grid)
    sensors = sensor_layout(grid, geometry, count)
    times = TimeAxis(args.nt, args.dt)
    t0 = time.perf_counter()
    data = simulate_data(p0, sensors, times, NoiseModel(args.noise, args.seed))
    io.write_sensordata(data, args.out)
    rows = sensors.rows
    m = _base_manifest("simulate", args)
    m.update({
        "kind": "sensordata", "sim_n": grid.n, "recon_n": recon_n, "physical_size": grid.physical_size,
        "sound_speed": grid.sound_speed, "pad": grid.pad_factor, "geometry": geometry,
        "sensor_count": count, "sensors_bottom": int(np.sum(rows == grid.n - 1)),
        "sensors_other": int(np.sum(rows != grid.n - 1)),
        "sensor_pixels": ";".join(f"{r}:{c}" for r, c in sensors.pixel_indices),
        "nt": args.nt, "dt": repr(args.dt), "noise": args.noise, "seed": args.seed,
        "evaluations": 1, "seconds": f"{time.perf_counter() - t0:.3f}",
    })
    io.write_manifest(args.out, m)
    print(f"wrote {args.out} ({count} sensors x {args.nt} samples, {geometry})")
    return 0


def _smoothing(args, s: float) -> SmoothingConfig:
    backend = BACKEND_ALIASES[args.backend]
    spec = None
    if backend == "wavelet":
        spec = WaveletSpec.from_name(args.wavelet, args.depth) if args.wavelet else WaveletSpec.default_for(s, args.depth)
    return SmoothingConfig(s, backend, spec, _budget(args))


def cmd_reconstruct(args) -> int:
    data = io.read_sensordata(args.data)
    meta = io.read_manifest(args.data)
    if meta is None:
        raise UsageError(f"{args.data} has no manifest; sensor positions are unknown")
    n = args.n or int(meta.get("recon_n", 128))
    grid = GridSpec(n, float(meta["physical_size"]), float(meta["sound_speed"]), args.pad or int(meta["pad"]))
    geometry, count = meta["geometry"], int(meta["sensor_count"])
    if n == int(meta["sim_n"]):
        pix = tuple(tuple(int(v) for v in p.split(":")) for p in meta["sensor_pixels"].split(";"))
        sensors = SensorArray(grid, pix, geometry)
    else:
        sensors = sensor_layout(grid, geometry, count)
    if args.recon_dt or args.recon_nt:
        dt = args.recon_dt or data.times.dt
        nt = args.recon_nt or int(math.floor(data.times.duration / dt + 1e-9)) + 1
        data = resample_time(data, TimeAxis(nt, dt))
    data = data.with_sensors(sensors)

    if args.matern_nu is not None:
        if args.matern_rho is None or args.noise_std is None:
            raise UsageError("--matern-nu needs --matern-rho and --noise-std")
        prior = MaternParams(args.matern_nu, args.matern_rho)
        smoothing = _smoothing(args, prior.smoothness)
        cfg = map_to_tikhonov(args.noise_std, prior, smoothing.backend, smoothing.wavelet_spec,
                              max_iters=args.iters, tol=args.tol, noise_mean=args.noise_mean,
                              prior_mean=args.prior_mean)
    else:
        cfg = ReconConfig(_smoothing(args, args.s), args.alpha, args.iters, args.tol,
                          args.noise_mean, args.prior_mean)
    t0 = time.perf_counter()
    res = reconstruct(data, cfg)
    elapsed = time.perf_counter() - t0
    io.write_field(res.estimate, args.out)
    history = args.history or str(args.out) + ".history.csv"
    io.write_csv(history, ["iteration", "residual", "objective"], res.history_rows())
    m = _base_manifest("reconstruct", args)
    m.update({
        "kind": "field", "n": n, "geometry": geometry, "sensor_count": count,
        "s": cfg.smoothing.s, "alpha": repr(cfg.alpha), "backend": cfg.smoothing.backend,
        "wavelet": cfg.smoothing.wavelet_spec.name if cfg.smoothing.wavelet_spec else "",
        "depth": cfg.smoothing.wavelet_spec.depth if cfg.smoothing.wavelet_spec else "",
        "nt": data.times.n_t, "dt": repr(data.times.dt), "iterations": res.iterations,
        "evaluations": res.evaluations, "converged": res.converged,
        "residual_first": repr(res.residual_history[0]), "residual_last": repr(res.residual_history[-1]),
        "residual_monotone": True, "history": history, "source": args.data,
        "seconds": f"{elapsed:.3f}",
    })
    if args.truth:
        truth = io.read_field(args.truth)
        m["relative_error"] = repr(relative_error(res.estimate, truth))
    io.write_manifest(args.out, m)
    extra = f", RE {float(m['relative_error']):.4f}" if args.truth else ""
    print(f"wrote {args.out} ({res.iterations} iterations, {res.evaluations} evaluations{extra})")
    return 0


def cmd_conditioning(args) -> int:
    grid = GridSpec(args.n, args.size, args.speed, args.pad, dyadic=False)
    times = TimeAxis(args.nt, args.dt) if args.dt else TimeAxis.covering(grid, args.nt)
    t0 = time.perf_counter()
    curve = condition_study(grid, args.max_sensors, times, _budget(args))
    io.write_csv(args.out, ["sensors", "condition_number"], curve)
    m = _base_manifest("conditioning", args)
    m.update({"kind": "csv", "rows": len(curve), "dt": repr(times.dt),
              "cond_first": repr(curve[0][1]), "cond_last": repr(curve[-1][1]),
              "evaluations": args.max_sensors, "seconds": f"{time.perf_counter() - t0:.3f}"})
    io.write_manifest(args.out, m)
    print(f"wrote {args.out}: cond {curve[0][1]:.3e} (1 sensor) -> {curve[-1][1]:.3e} ({args.max_sensors} sensors)")
    return 0


def cmd_filters_check(args) -> int:
    results = run_checks(args.inject)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} identities hold")
    return 0 if failed == 0 else 1


def cmd_table(args) -> int:
    setup = StudySetup(sim_n=args.sim_n, recon_n=args.recon_n, physical_size=args.size,
                       sound_speed=args.speed, pad_factor=args.pad, sensors=args.sensors,
                       noise=args.noise, seed=args.seed, alpha=args.alpha, iters=args.iters,
                       backend=BACKEND_ALIASES[args.backend], depth=args.depth,
                       geometries=args.geometries, smoothness=args.smoothness)
    if setup.sim_n < 2 * setup.recon_n and not args.allow_inverse_crime:
        raise UsageError("--sim-n must be at least twice --recon-n (or pass --allow-inverse-crime)")
    t0 = time.perf_counter()
    truth, runs = run_study(setup)
    io.write_csv(args.out, ["geometry", "s", "relative_error", "evaluations", "iterations"],
                 [(r.geometry, r.s, r.error, r.result.evaluations, r.result.iterations) for r in runs])
    m = _base_manifest("table", args)
    m["kind"] = "csv"
    for r in runs:
        key = f"{r.geometry}.s{r.s:g}"
        m[f"re.{key}"] = repr(r.error)
        m[f"evaluations.{key}"] = r.result.evaluations
    if args.history_dir:
        hdir = Path(args.history_dir)
        hdir.mkdir(parents=True, exist_ok=True)
        for r in runs:
            io.write_csv(hdir / f"history_{r.geometry}_s{r.s:g}.csv",
                         ["iteration", "residual", "objective"], r.result.history_rows())
    if args.profile_row is not None:
        row = args.profile_row
        x, t = cross_section(truth, row)
        cols = [t]
        for r in runs:
            cols.append(cross_section(resample_field(r.result.estimate, truth.grid), row)[1])
        io.write_csv(str(args.out) + ".profile.csv",
                     ["x", "truth"] + [f"{r.geometry}_s{r.s:g}" for r in runs],
                     zip(x, *cols))
    m["seconds"] = f"{time.perf_counter() - t0:.3f}"
    io.write_manifest(args.out, m)
    for r in runs:
        print(f"{r.geometry:10s} s={r.s:<4g} RE={r.error:.4f} evaluations={r.result.evaluations}")
    return 0


# ---------------------------------------------------------------- parser

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    p.add_argument("--memory-budget-gib", type=float, default=DEFAULT_MEMORY_BUDGET / 2**30)
    p.add_argument("--log-level", default="WARNING")


def _add_physics(p: argparse.ArgumentParser, pad: bool = True) -> None:
    p.add_argument("--size", type=float, default=0.05, help="domain side length in m")
    p.add_argument("--speed", type=float, default=1500.0, help="sound speed in m/s")
    if pad:
        p.add_argument("--pad", type=int, default=2, help="periodic padding factor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patrecon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="rasterize a phantom to a PATB field")
    _add_common(p)
    _add_physics(p)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--circle", action="append", metavar="X,Y,R,VALUE",
                   help="circle in fractions of the domain side (repeatable)")
    p.add_argument("--rect", action="append", metavar="X,Y,W,H,VALUE",
                   help="rectangle corner and extent in fractions of the side (repeatable)")
    p.add_argument("--background", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", help="simulate noisy boundary data from a field")
    _add_common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--geometry", choices=sorted(GEOMETRY_ALIASES), default=None)
    p.add_argument("--sensors", default="80", help="count or 'full' for every available pixel")
    p.add_argument("--nt", type=int, default=1200)
    p.add_argument("--dt", type=float, default=4e-8)
    p.add_argument("--noise", type=float, default=0.05, help="noise std as a fraction of max |signal|")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--pad", type=int, default=2)
    p.add_argument("--recon-n", type=int, default=128, help="reconstruction grid the data is meant for")
    p.add_argument("--same-grid", action="store_true", help="reconstruct on the simulation grid")
    p.add_argument("--allow-inverse-crime", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="regularized reconstruction by GMRES")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None, help="reconstruction grid (default from the data manifest)")
    p.add_argument("--pad", type=int, default=None)
    p.add_argument("--s", type=float, default=1.5)
    p.add_argument("--alpha", type=float, default=1e-5)
    p.add_argument("--backend", choices=sorted(BACKEND_ALIASES), default="fourier")
    p.add_argument("--wavelet", default=None, help="Daubechies family, e.g. db6 (default chosen from s)")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--recon-dt", type=float, default=None)
    p.add_argument("--recon-nt", type=int, default=None)
    p.add_argument("--noise-mean", type=float, default=0.0)
    p.add_argument("--prior-mean", type=float, default=0.0)
    p.add_argument("--matern-nu", type=float, default=None)
    p.add_argument("--matern-rho", type=float, default=None, help="length scale in pixels")
    p.add_argument("--noise-std", type=float, default=None)
    p.add_argument("--truth", default=None, help="field to compute the relative error against")
    p.add_argument("--history", default=None, help="residual/objective CSV path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("conditioning", help="condition number of K versus sensor count")
    _add_common(p)
    _add_physics(p)
    p.add_argument("--n", type=int, default=24)
    p.add_argument("--max-sensors", type=int, default=92)
    p.add_argument("--nt", type=int, default=60)
    p.add_argument("--dt", type=float, default=None, help="default: nt samples over one diagonal crossing")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_conditioning)

    p = sub.add_parser("filters-check", help="verify the kernel and smoother identities")
    _add_common(p)
    p.add_argument("--inject", choices=FAULTS, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_filters_check)

    p = sub.add_parser("table", help="limited-view relative-error study")
    _add_common(p)
    _add_physics(p)
    p.add_argument("--sim-n", type=int, default=256)
    p.add_argument("--recon-n", type=int, default=128)
    p.add_argument("--sensors", type=int, default=80)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--alpha", type=float, default=1e-5)
    p.add_argument("--iters", type=int, default=15)
    p.add_argument("--backend", choices=sorted(BACKEND_ALIASES), default="wavelet")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--geometries", nargs="+", choices=sorted(GEOMETRY_ALIASES), default=["one_sided", "two_sided"])
    p.add_argument("--smoothness", nargs="+", type=float, default=[0.0, 1.5, 3.0])
    p.add_argument("--allow-inverse-crime", action="store_true")
    p.add_argument("--history-dir", default=None)
    p.add_argument("--profile-row", type=int, default=None, help="also write a cross-section CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Flags > config file > defaults: config values become the subparser defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        values = io.parse_key_values(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, text in values.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if action.nargs == 0:
            defaults[dest] = text.lower() in ("1", "true", "yes")
        elif action.nargs == "+":
            conv = action.type or str
            defaults[dest] = [conv(v) for v in text.replace(",", " ").split()]
        else:
            try:
                defaults[dest] = action.type(text) if action.type else text
            except ValueError:
                raise UsageError(f"config key {key!r}: bad value {text!r}") from None
            if action.choices is not None and defaults[dest] not in action.choices:
                raise UsageError(f"config key {key!r}: {text!r} not in {sorted(action.choices)}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except PatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    workers = scipy.fft.set_workers(args.threads) if args.threads and args.threads > 0 else nullcontext()
    try:
        with workers:
            return args.func(args)
    except PatbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MemoryError as exc:
        print(f"error: out of memory: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
