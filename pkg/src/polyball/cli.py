"""Command line front end: build, verify, and trace subcommands.

Exit codes: 0 success, 2 verification or build failure, 3 bad
configuration.  Failures print a structured error JSON on stdout so
drivers can dispatch on the error class.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blocks import build_exhaustion, find_skeleton_offsets
from .errors import ConfigError, ManifestMismatch, PolyballError
from .lattice import build_generic_basis
from .lift import CapWindow
from .paths import PolylinePath, analyze_path
from .serialize import (
    SCHEMA,
    crossing_report_csv,
    dumps,
    load_exhaustion,
    profile_csv,
    save_exhaustion,
    series_from_text,
    series_to_text,
)
from .verify import (
    SUITES,
    suite_blocks,
    suite_delaunay,
    suite_lift,
    suite_runge,
    suite_shell,
)

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_CONFIG = 3

#: ladder offsets in units of the window grain g = ladder_sigma * d
LADDER_STEPS = (0.0, 1.2, 4.4, 5.6)
LADDER_DEPTH = 6.8


@dataclass(frozen=True)
class RunConfig:
    """Validated build configuration (JSON schema "v1")."""

    dimension: int
    complex_build: bool
    lattice_seed: int
    lattice_perturbation: float
    base_radius: float
    window_radius: float
    ladder_sigma: float
    epsilon: float
    n_blocks: int
    a: float
    r1: float | None
    seed: int
    samples: int
    max_polytopes: int | None
    max_rotations: int | None
    facet_budget: float
    series_n_max: int


def load_config(path, seed_override=None, samples=None):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError("cannot read config %s: %s" % (path, e))
    if raw.get("schema") != SCHEMA:
        raise ConfigError("config schema must be %r" % SCHEMA)

    def get(key, default=None, required=False):
        if required and key not in raw:
            raise ConfigError("config is missing %r" % key)
        return raw.get(key, default)

    dim = int(get("dimension", required=True))
    if dim < 3:
        raise ConfigError("dimension must be >= 3")
    cplx = bool(get("complex", False))
    if cplx and dim % 2 != 0:
        raise ConfigError("complex build needs an even dimension")
    lat = get("lattice", {})
    win = get("window", {})
    series = get("series", {})
    cfg = RunConfig(
        dimension=dim,
        complex_build=cplx,
        lattice_seed=int(seed_override if seed_override is not None
                         else lat.get("seed", 1)),
        lattice_perturbation=float(lat.get("perturbation", 0.3)),
        base_radius=float(win.get("base_radius", 0.87)),
        window_radius=float(win.get("window_radius", 0.31)),
        ladder_sigma=float(win.get("ladder_sigma", 0.008)),
        epsilon=float(get("epsilon", 0.25)),
        n_blocks=int(get("n_blocks", 1)),
        a=float(get("a", 4.0)),
        r1=None if get("r1") is None else float(get("r1")),
        seed=int(seed_override if seed_override is not None
                 else get("seed", 3)),
        samples=int(samples if samples is not None
                    else get("samples", 4000)),
        max_polytopes=None if get("max_polytopes") is None
        else int(get("max_polytopes")),
        max_rotations=None if get("max_rotations") is None
        else int(get("max_rotations")),
        facet_budget=float(get("facet_budget", 2.0e6)),
        series_n_max=int(series.get("n_max", 6)),
    )
    if not 0.0 < cfg.window_radius < cfg.base_radius < 1.0:
        raise ConfigError("need 0 < window_radius < base_radius < 1")
    if cfg.n_blocks < 1 or cfg.ladder_sigma <= 0 or cfg.epsilon <= 0:
        raise ConfigError("n_blocks, ladder_sigma, epsilon must be positive")
    return cfg, raw


def make_window(cfg, lattice):
    """Window with the package's standard inner-radius ladder: the ladder
    sits LADDER_DEPTH window grains below the rim so every shell at
    sigma <= ladder_sigma keeps full cell coverage over U2."""
    g = cfg.ladder_sigma * lattice.longest_edge
    mu0 = cfg.window_radius - LADDER_DEPTH * g
    if mu0 <= 0:
        raise ConfigError(
            "ladder_sigma too large: the inner ladder leaves the window")
    nu = 1.0 - 0.99 * np.sqrt(
        cfg.base_radius ** 2 - cfg.window_radius ** 2)
    return CapWindow(
        dimension=cfg.dimension,
        window_radius=cfg.window_radius,
        shell_half_width=float(nu),
        inner_radii=tuple(mu0 + s * g for s in LADDER_STEPS),
        base_radius=cfg.base_radius,
    )


def _error_json(exc):
    return dumps({"error": type(exc).__name__, "message": str(exc)})


def cmd_build(args):
    cfg, raw = load_config(args.config, args.seed_override, args.samples)
    out = Path(args.out)
    lattice = build_generic_basis(
        cfg.dimension - 1, cfg.lattice_perturbation, cfg.lattice_seed)
    family = find_skeleton_offsets(lattice, cfg.epsilon, seed=cfg.seed + 4)
    window = make_window(cfg, lattice)
    exh = build_exhaustion(
        lattice, family, window, cfg.n_blocks, r1=cfg.r1, a=cfg.a,
        seed=cfg.seed, max_polytopes=cfg.max_polytopes,
        max_rotations=cfg.max_rotations, facet_budget=cfg.facet_budget,
    )
    extra = {"config.json": dumps(raw)}
    if cfg.complex_build:
        from .holo import build_f_sequence

        n_max = min(cfg.series_n_max, exh.n_built)
        series = build_f_sequence(exh, n_max, seed=cfg.seed + 11,
                                  n_samples=cfg.samples)
        extra["series.json"] = series_to_text(series)
    save_exhaustion(exh, out, extra_texts=extra)
    _print_summary(exh)
    # polytopes + exhaustion.json + extras + manifest
    print("wrote %d artifact files to %s"
          % (exh.n_built + len(extra) + 2, out))
    return EXIT_OK


def _print_summary(exh):
    M, L = exh.constants["M"], exh.constants["L"]
    mu = exh.constants["mu"]
    per = M * L
    print("block   r_j        sigma_j    facets(min/max)   mu*sigma_j")
    for k in range(len(exh.sigmas)):
        chunk = exh.polytopes[k * per: (k + 1) * per]
        if not chunk:
            break
        counts = [P.n_facets for P in chunk]
        print("%-7d %-10.6f %-10.3e %6d /%6d     %.3e" % (
            k + 1, exh.radii[k + 1], exh.sigmas[k],
            min(counts), max(counts), mu * exh.sigmas[k]))


def _load_series(out):
    f = Path(out) / "series.json"
    if not f.is_file():
        return None
    return series_from_text(f.read_text())


def cmd_verify(args):
    out = Path(args.out)
    if args.suite not in SUITES:
        raise ConfigError("unknown suite %r; choose from %s"
                          % (args.suite, "|".join(SUITES)))
    exh = load_exhaustion(out)
    cfgfile = out / "config.json"
    if not cfgfile.is_file():
        raise ConfigError("build directory has no config.json")
    cfg, _ = load_config(cfgfile, args.seed_override, args.samples)
    if args.suite == "delaunay":
        lattice = build_generic_basis(
            cfg.dimension - 1, cfg.lattice_perturbation, cfg.lattice_seed)
        report = suite_delaunay(lattice)
    elif args.suite == "lift":
        lattice = build_generic_basis(
            cfg.dimension - 1, cfg.lattice_perturbation, cfg.lattice_seed)
        window = make_window(cfg, lattice)
        report = suite_lift(lattice, window, float(exh.radii[1]),
                            float(exh.sigmas[0]))
    elif args.suite == "shell":
        report = suite_shell(exh)
    elif args.suite == "blocks":
        report = suite_blocks(exh)
    else:
        report = suite_runge(_load_series(out), n_samples=cfg.samples)
    text = dumps(report)
    (out / ("report_%s.json" % args.suite)).write_text(text)
    print(text, end="")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def _parse_path(spec, dimension):
    if spec.startswith("radial:"):
        parts = [float(x) for x in spec[len("radial:"):].split(",")]
        if len(parts) != dimension:
            raise ConfigError(
                "radial direction needs %d components" % dimension)
        q = np.asarray(parts)
        n = np.linalg.norm(q)
        if n == 0:
            raise ConfigError("radial direction must be nonzero")
        q = q / n
        t = np.linspace(0.0, 0.999, 200)
        return PolylinePath(vertices=t[:, None] * q[None, :])
    try:
        raw = json.loads(Path(spec).read_text())
        verts = np.asarray(raw["vertices"], dtype=float)
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError("cannot read path spec %s: %s" % (spec, e))
    if verts.ndim != 2 or verts.shape[1] != dimension:
        raise ConfigError("path vertices must be (k, %d)" % dimension)
    if np.linalg.norm(verts, axis=1).max() >= 1.0:
        raise ConfigError("path leaves the closed unit ball")
    return PolylinePath(vertices=verts)


def cmd_trace(args):
    out = Path(args.out)
    exh = load_exhaustion(out)
    dim = exh.polytopes[0].dimension
    path = _parse_path(args.path_spec, dim)
    report = analyze_path(path, exh)
    (out / "crossings.csv").write_text(crossing_report_csv(report))
    series = _load_series(out)
    if series is not None:
        from .holo import trace_along_path

        profile = trace_along_path(path, series,
                                   samples_per_segment=args.samples or 50)
        (out / "profile.csv").write_text(profile_csv(profile))
        print("max Re f along path: %.6g" % profile["max_re"])
    else:
        print("geometric-only trace (no complex build present)")
    print("crossings: %d, certified length lower bound %.6g"
          % (len(report.crossings), report.length_lower_bound))
    return EXIT_OK


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="polyball",
        description="build, verify, and trace polytope exhaustions",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build an exhaustion from a config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--seed-override", type=int, default=None)
    b.add_argument("--samples", type=int, default=None)
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--out", required=True)
    v.add_argument("--suite", required=True)
    v.add_argument("--seed-override", type=int, default=None)
    v.add_argument("--samples", type=int, default=None)
    v.set_defaults(func=cmd_verify)

    t = sub.add_parser("trace", help="crossing report and Re f profile")
    t.add_argument("--out", required=True)
    t.add_argument("path_spec",
                   help="path JSON file or radial:<direction components>")
    t.add_argument("--samples", type=int, default=None)
    t.set_defaults(func=cmd_trace)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(_error_json(e), end="")
        return EXIT_CONFIG
    except ManifestMismatch as e:
        print(_error_json(e), end="")
        return EXIT_VERIFY
    except PolyballError as e:
        print(_error_json(e), end="")
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
