"""Command-line front end: ``newton-basins {render,verify,trace,channels,exhaust}``.

Exit codes: 0 success (all checks pass), 1 a check failed, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Callable, Optional

import numpy as np

from . import grid as gridmod
from .channels import (
    CountMismatch,
    NoEscapePixels,
    RadiusTooSmall,
    cluster_escape_directions,
    conjugation_residual,
    count_channels,
    separation_check,
)
from .config import ALL_CHECKS, ENV_VAR, ConfigError, RunConfig, load_config
from .curve import SeedInvalid, extend_curve, read_seed_csv, write_curve_csv
from .function import FamilyExpZn, ParseError
from .grid import (
    BasinGrid,
    NoInvariantDisk,
    RootOutsideGrid,
    Sector,
    build_exhaustion,
    check_unbounded,
    confirmed_holes,
    exhaustion_ratio,
    immediate_basin,
    verify_absorbing,
)
from .image import overlay_points, render_rgb, write_png, write_ppm

SCHEMA_VERSION = 1

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2
UNBOUNDED_MAX_BUDGET = 8192


class InapplicableCheck(ValueError):
    pass


# ---------------------------------------------------------------- helpers


def build_grid(cfg: RunConfig, spec=None) -> BasinGrid:
    """Rasterize the configured function; tests may substitute a fixture."""
    return gridmod.rasterize(cfg.entire_function(), spec or cfg.grid_spec(), cfg.budget, cfg.tolerances, cfg.workers)


def _workers(value: Optional[int]) -> int:
    return value if value is not None else (os.cpu_count() or 1)


def _cpx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return _cpx(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _emit(report: dict, path: Optional[str]) -> None:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_report(command: str, cfg: RunConfig) -> dict:
    config = cfg.to_dict()
    # the worker count never changes results, so reports leave it out
    config.pop("workers")
    return {"schema_version": SCHEMA_VERSION, "command": command, "function": str(cfg.make_function()), "config": config}


def _write_image(path: str, rgb: np.ndarray) -> None:
    if path.lower().endswith(".png"):
        write_png(path, rgb)
    else:
        write_ppm(path, rgb)


def _target_roots(grid: BasinGrid, cfg: RunConfig) -> list[complex]:
    if cfg.root is not None:
        rid, dist = grid.registry.nearest(cfg.root) if len(grid.registry) else (None, math.inf)
        if rid is None or dist > 1e-3 * (1 + abs(cfg.root)):
            raise InapplicableCheck(f"no root found near {cfg.root}")
        return [grid.registry[rid].position]
    return [grid.registry[i].position for i in grid.roots_inside()]


def _family_n(cfg: RunConfig) -> Optional[int]:
    f = cfg.make_function()
    return f.n if isinstance(f, FamilyExpZn) else None


# ---------------------------------------------------------------- checks


def check_holes(cfg: RunConfig, grid: BasinGrid) -> dict:
    fun = cfg.entire_function()
    targets = [("root", r) for r in _target_roots(grid, cfg)]
    targets += [("escape", d) for d in grid.cluster_directions]
    if not targets:
        raise InapplicableCheck("no root basins or escape clusters in the grid")
    items = []
    for target in targets:
        found, confirmed = confirmed_holes(fun, grid.spec, target, cfg.budget, cfg.tolerances, cfg.workers, grid=grid)
        items.append({"target": target[0], "at": target[1], "found": len(found), "confirmed": len(confirmed)})
    return {"passed": all(i["confirmed"] == 0 for i in items), "targets": items}


def check_unbounded_all(cfg: RunConfig, grid: BasinGrid) -> dict:
    roots = _target_roots(grid, cfg)
    if not roots:
        raise InapplicableCheck("no roots inside the grid")
    fun = cfg.entire_function()
    items = []
    for r in roots:
        # channels of slowly converging basins thin out on large grids; a
        # failed attempt is repeated with a larger budget
        budget = cfg.budget
        while True:
            rounds = check_unbounded(fun, r, grid.spec, 2.0, 2, budget, cfg.tolerances, cfg.workers)
            if all(x.touches_boundary for x in rounds) or budget >= UNBOUNDED_MAX_BUDGET:
                break
            budget = min(4 * budget, UNBOUNDED_MAX_BUDGET)
        items.append({
            "root": r,
            "budget": budget,
            "rounds": [{"width": x.spec.width, "touches_boundary": x.touches_boundary, "basin_pixels": x.basin_pixels} for x in rounds],
        })
    passed = all(all(x["touches_boundary"] for x in i["rounds"]) for i in items)
    return {"passed": passed, "roots": items}


def check_exhaustion(cfg: RunConfig, grid: BasinGrid) -> dict:
    roots = _target_roots(grid, cfg)
    if not roots:
        raise InapplicableCheck("no roots inside the grid")
    fun = cfg.entire_function()
    items = []
    for r in roots:
        basin = immediate_basin(grid, r)
        try:
            levels = build_exhaustion(fun, r, grid.spec, cfg.levels, cfg.tolerances)
        except NoInvariantDisk as exc:
            items.append({"root": r, "passed": False, "reason": str(exc)})
            continue
        ratios = {lv.k: exhaustion_ratio(lv.mask, basin) for lv in levels}
        marks = [k for k in range(5, cfg.levels + 1, 5)] or [cfg.levels]
        seq = [ratios[k] for k in marks]
        ok = seq[-1] < 0.05 and all(b <= a for a, b in zip(seq, seq[1:]))
        items.append({"root": r, "passed": ok, "ratios": {str(k): ratios[k] for k in marks}})
    return {"passed": all(i["passed"] for i in items), "roots": items}


def check_channels(cfg: RunConfig, grid: BasinGrid) -> dict:
    roots = _target_roots(grid, cfg)
    if not roots:
        raise InapplicableCheck("channels needs a root")
    fun = cfg.entire_function()
    n = _family_n(cfg)
    radii = [cfg.radius * f for f in (0.75, 1.0, 1.5)]
    items = []
    for r in roots:
        counts = {}
        try:
            for rad in radii:
                counts[str(rad)] = count_channels(fun, r, rad, cfg.samples, cfg.budget, cfg.tolerances).arc_count
        except RadiusTooSmall as exc:
            items.append({"root": r, "passed": False, "reason": str(exc)})
            continue
        values = list(counts.values())
        ok = len(set(values)) == 1 and (n is None or values[0] == n)
        items.append({"root": r, "passed": ok, "arc_counts": counts, "expected": n})
    return {"passed": all(i["passed"] for i in items), "roots": items}


def check_conjugation(cfg: RunConfig, grid: BasinGrid) -> dict:
    from scipy.stats import qmc

    n = _family_n(cfg)
    if n is None:
        raise InapplicableCheck("conjugation applies to the exp_zn family only")
    u = qmc.Halton(d=2, scramble=True, seed=cfg.seed).random(1000)
    r = np.sqrt(0.1**2 + u[:, 0] * (2.0**2 - 0.1**2))
    zeta = r * np.exp(2j * np.pi * u[:, 1])
    scaled = [conjugation_residual(n, z) / (1 + abs(z) ** (n + 1)) for z in zeta]
    worst = float(max(scaled))
    return {"passed": worst <= 1e-12, "samples": len(scaled), "max_scaled_residual": worst}


def check_absorbing(cfg: RunConfig, grid: BasinGrid) -> dict:
    n = _family_n(cfg)
    directions = [2 * math.pi * k / n for k in range(n)] if n else list(grid.cluster_directions)
    if not directions:
        raise InapplicableCheck("no escape directions to build absorbing sectors for")
    aperture = min(0.5, math.pi / len(directions))
    fun = cfg.entire_function()
    items = []
    for d in directions:
        rep = verify_absorbing(fun, Sector(d, aperture, 3.0), budget=max(cfg.budget, 2048), tol=cfg.tolerances, seed=cfg.seed)
        items.append({"passed": rep.passed, **rep.to_dict()})
    return {"passed": all(i["passed"] for i in items), "regions": items}


def check_separation(cfg: RunConfig, grid: BasinGrid) -> dict:
    roots = _target_roots(grid, cfg)
    if len(roots) != 1:
        raise InapplicableCheck(f"separation needs exactly one root, found {len(roots)}")
    try:
        petals = cluster_escape_directions(grid)
    except NoEscapePixels as exc:
        raise InapplicableCheck(str(exc)) from exc
    fun = cfg.entire_function()
    ch = count_channels(fun, roots[0], cfg.radius, cfg.samples, cfg.budget, cfg.tolerances)
    try:
        rep = separation_check(grid, ch, petals, cfg.budget, cfg.tolerances)
    except CountMismatch as exc:
        return {"passed": False, "reason": str(exc)}
    return rep.to_dict()


CHECKS: dict[str, Callable[[RunConfig, BasinGrid], dict]] = {
    "holes": check_holes,
    "unbounded": check_unbounded_all,
    "exhaustion": check_exhaustion,
    "channels": check_channels,
    "conjugation": check_conjugation,
    "absorbing": check_absorbing,
    "separation": check_separation,
}


# ---------------------------------------------------------------- commands


def cmd_render(cfg: RunConfig) -> int:
    grid = build_grid(cfg)
    out = cfg.out or "basins.ppm"
    _write_image(out, render_rgb(grid))
    report = _base_report("render", cfg)
    report["image"] = out
    report["summary"] = grid.summary()
    _emit(report, cfg.report)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, explicit: bool) -> int:
    grid = build_grid(cfg)
    report = _base_report("verify", cfg)
    report["summary"] = grid.summary()
    results = {}
    for name in cfg.checks:
        try:
            res = CHECKS[name](cfg, grid)
        except InapplicableCheck as exc:
            if explicit:
                raise
            res = {"passed": None, "skipped": str(exc)}
        results[name] = res
    report["checks"] = results
    ran = [r["passed"] for r in results.values() if r["passed"] is not None]
    report["passed"] = all(ran)
    _emit(report, cfg.report)
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_trace(cfg: RunConfig) -> int:
    if not cfg.curve:
        raise ConfigError("trace needs a seed curve CSV (positional argument or curve key)")
    seed = read_seed_csv(cfg.curve)
    ext = extend_curve(cfg.entire_function(), seed, cfg.t_budget, cfg.curve_tolerances)
    write_curve_csv(cfg.out or sys.stdout, ext)
    if cfg.report:
        report = _base_report("trace", cfg)
        report["outcome"] = ext.summary()
        _emit(report, cfg.report)
    return EXIT_OK


def cmd_channels(cfg: RunConfig) -> int:
    grid = build_grid(cfg)
    fun = cfg.entire_function()
    report = _base_report("channels", cfg)
    report["summary"] = grid.summary()
    roots = _target_roots(grid, cfg)
    if not roots:
        raise InapplicableCheck("no roots inside the grid")
    items = []
    rgb = render_rgb(grid)
    theta = 2 * np.pi * np.arange(cfg.samples) / cfg.samples
    for r in roots:
        ch = count_channels(fun, r, cfg.radius, cfg.samples, cfg.budget, cfg.tolerances)
        items.append(ch.to_dict())
        circle = r + cfg.radius * np.exp(1j * theta)
        rgb = overlay_points(rgb, grid.spec, circle[ch.accepted], (255, 0, 0))
    report["channels"] = items
    if grid.cluster_directions:
        report["petals"] = cluster_escape_directions(grid).to_dict()
    if cfg.out:
        _write_image(cfg.out, rgb)
        report["image"] = cfg.out
    _emit(report, cfg.report)
    return EXIT_OK


def cmd_exhaust(cfg: RunConfig) -> int:
    grid = build_grid(cfg)
    fun = cfg.entire_function()
    report = _base_report("exhaust", cfg)
    roots = _target_roots(grid, cfg)
    if not roots:
        raise InapplicableCheck("no roots inside the grid")
    items = []
    for r in roots:
        basin = immediate_basin(grid, r)
        levels = build_exhaustion(fun, r, grid.spec, cfg.levels, cfg.tolerances)
        items.append({"root": r, "basin_pixels": int(basin.sum()), "ratios": [exhaustion_ratio(lv.mask, basin) for lv in levels]})
        if cfg.out and len(roots) == 1:
            # brightness by first level containing the pixel
            depth = np.full(grid.spec.shape, cfg.levels + 1)
            for lv in reversed(levels):
                depth[lv.mask] = lv.k
            v = np.where(depth <= cfg.levels, 255 - (200 * depth) // max(1, cfg.levels), 0).astype(np.uint8)
            _write_image(cfg.out, np.repeat(v[..., None], 3, axis=2))
            report["image"] = cfg.out
    report["exhaustion"] = items
    _emit(report, cfg.report)
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def _complex_arg(text: str) -> complex:
    from .config import _complex

    try:
        return _complex(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"config file (default: ${ENV_VAR})")
    common.add_argument("--function", help="entire function in z, e.g. 'z^3-1' or 'sin(z)'")
    common.add_argument("--family", choices=["exp_zn"], help="built-in family z*exp(-z^n/n)")
    common.add_argument("--n", type=int, help="family exponent")
    common.add_argument("--center", type=_complex_arg, help="grid center, 'x,y' or '0.5-1j'")
    common.add_argument("--width", type=float)
    common.add_argument("--height", type=float)
    common.add_argument("--cols", type=int)
    common.add_argument("--rows", type=int)
    common.add_argument("--budget", type=int, help="orbit iteration budget")
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int, help="seed for quasirandom samples")
    common.add_argument("--out", help="output image or curve path")
    common.add_argument("--report", help="JSON report path (default: stdout)")
    common.add_argument("--root", type=_complex_arg, help="restrict to the root nearest this point")
    common.add_argument("--radius", type=float)
    common.add_argument("--samples", type=int, help="samples per circle")
    common.add_argument("--levels", type=int, help="exhaustion depth")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE", help="override a tolerance")

    p = argparse.ArgumentParser(prog="newton-basins", description="Newton-map basins of entire functions.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("render", parents=[common], help="rasterize basins and write an image")
    v = sub.add_parser("verify", parents=[common], help="run invariant checks")
    v.add_argument("--checks", help=f"comma list of {','.join(ALL_CHECKS)} or all")
    t = sub.add_parser("trace", parents=[common], help="extend a seed curve by backward iteration")
    t.add_argument("curve", nargs="?", help="seed CSV with rows t,re,im")
    t.add_argument("--t-budget", type=float, dest="t_budget")
    sub.add_parser("channels", parents=[common], help="count channels of root basins to infinity")
    sub.add_parser("exhaust", parents=[common], help="build the exhaustion of a root basin")
    return p


def _tolerance_overrides(items: list[str]) -> dict:
    from .config import parse_config_text

    if not items:
        return {}
    lines = []
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--tol expects KEY=VALUE, got {item!r}", "<command line>")
        lines.append(item)
    return parse_config_text("[tolerances]\n" + "\n".join(lines) + "\n", "<command line>")


def config_from_args(args: argparse.Namespace) -> tuple[RunConfig, bool]:
    names = ["function", "family", "n", "center", "width", "height", "cols", "rows", "budget", "workers", "seed",
             "out", "report", "root", "radius", "samples", "levels", "t_budget", "curve"]
    overrides = {k: getattr(args, k, None) for k in names}
    explicit = False
    checks = getattr(args, "checks", None)
    if checks is not None:
        from .config import _checks

        try:
            overrides["checks"] = _checks(checks)
        except ValueError as exc:
            raise ConfigError(str(exc), "<command line>") from exc
        explicit = checks.strip() != "all"
    overrides.update(_tolerance_overrides(args.tol))
    cfg = load_config(args.config, **overrides)
    if cfg.workers is None:
        cfg = cfg.with_overrides(workers=_workers(None))
    return cfg, explicit


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, explicit = config_from_args(args)
        cfg.make_function()
        if args.command == "render":
            return cmd_render(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, explicit)
        if args.command == "trace":
            return cmd_trace(cfg)
        if args.command == "channels":
            return cmd_channels(cfg)
        return cmd_exhaust(cfg)
    except (ConfigError, ParseError, InapplicableCheck, SeedInvalid, RootOutsideGrid, RadiusTooSmall) as exc:
        print(f"newton-basins: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"newton-basins: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
