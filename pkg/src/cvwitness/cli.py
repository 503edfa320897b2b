"""Command-line front end.

Every command writes plain data (CM JSON, record JSON or CSV) to stdout or
``--out``.  Commands that take ``--out`` also write ``<out>.manifest.json``
with the full configuration, seed and version.  Wall-clock time goes into a
separate ``<out>.timing.json`` so the data and manifest bytes replay exactly.

Exit codes: 0 success (``detect``: entanglement detected), 1 not detected,
2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .detector import (
    BISECT,
    BOUND4,
    RANDOM,
    SEQUENTIAL,
    SQUEEZED,
    DetectionConfig,
    Family,
    detect,
    manifest,
    montecarlo,
    table_manifest,
)
from .homodyne import sample_setting, scan_surface, settings_from_json, settings_to_json
from .states import RandomStateConfig, bound_entangled_4mode, random_covariance, squeezed_vacuum
from .stats import confidence_csv, repetitions_for_confidence, upper_confidence
from .symplectic import check_partition, cm_from_json, cm_to_json, is_physical, n_modes_of
from .witness import WitnessProblem, optimize, records_for

SEED_ENV = "CVWITNESS_SEED"
EXIT_DETECTED, EXIT_NOT_DETECTED, EXIT_ERROR = 0, 1, 2


class CliError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV, "0")
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _partition(text: str | None):
    if text is None:
        return None
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise CliError(f"bad partition {text!r}; expected e.g. 2,2") from None


def _n_range(text: str) -> np.ndarray:
    try:
        parts = [int(p) for p in text.split(":")]
    except ValueError:
        parts = []
    if len(parts) not in (2, 3) or parts[0] < 2 or parts[1] < parts[0]:
        raise CliError(f"bad --n-range {text!r}; expected lo:hi[:step] with 2 <= lo <= hi")
    step = parts[2] if len(parts) == 3 else 1
    if step < 1:
        raise CliError("--n-range step must be positive")
    return np.arange(parts[0], parts[1] + 1, step)


def _read_cm(path: str) -> np.ndarray:
    try:
        gamma = cm_from_json(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from None
    if not is_physical(gamma):
        raise CliError(f"{path}: covariance matrix is not physical")
    return gamma


def _emit(args, text: str, meta: dict | None = None) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text, encoding="utf-8")
    if meta is not None:
        Path(f"{out}.manifest.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        Path(f"{out}.timing.json").write_text(
            json.dumps({"wall_clock_s": round(time.time() - args.started, 3)}) + "\n",
            encoding="utf-8")


# ---- commands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.state == "squeezed-vacuum":
        gamma, extra = squeezed_vacuum(args.r), {"state": "squeezed-vacuum", "r": args.r}
    elif args.state == "bound4":
        gamma, extra = bound_entangled_4mode(), {"state": "bound4"}
    elif args.state == "random":
        seed = default_seed() if args.seed is None else args.seed
        cfg = RandomStateConfig(modes=args.modes, nu_hi=args.nu_max, r_max=args.r_max, seed=seed)
        gamma, extra = random_covariance(cfg), {"state": "random", **asdict(cfg)}
    else:
        seed = default_seed() if args.seed is None else args.seed
        rng = np.random.default_rng(seed)
        settings = [sample_setting(args.modes, rng) for _ in range(args.count)]
        _emit(args, settings_to_json(settings) + "\n")
        return 0
    _emit(args, cm_to_json(gamma, **extra) + "\n")
    return 0


def _detection_config(args, seed: int) -> DetectionConfig:
    return DetectionConfig(partition=_partition(args.partition), max_settings=args.max_settings,
                           noise=args.noise, ksigma=args.ksigma, seed=seed, search=args.search)


def cmd_detect(args) -> int:
    gamma = _read_cm(args.cm)
    seed = default_seed() if args.seed is None else args.seed
    config = _detection_config(args, seed)
    config.resolve(n_modes_of(gamma))
    record = detect(gamma, config)
    meta = manifest("detect", {"cm": args.cm, "detection": asdict(config)}, seed)
    payload = {"record": record.to_dict(with_settings=True), "manifest": meta}
    _emit(args, json.dumps(payload) + "\n", meta)
    return EXIT_DETECTED if record.detected else EXIT_NOT_DETECTED


def cmd_montecarlo(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    rcfg = RandomStateConfig(modes=args.modes, nu_hi=args.nu_max, r_max=args.r_max)
    family = Family(args.family, tuple(args.r_values), rcfg)
    config = _detection_config(args, seed)
    table = montecarlo(family, args.trials, config, workers=args.workers)
    _emit(args, table.to_csv(), table_manifest(family, args.trials, config, table))
    return 0


def cmd_scan(args) -> int:
    gamma = _read_cm(args.cm)
    if args.grid < 2:
        raise CliError("--grid must be >= 2")
    try:
        surface = scan_surface(gamma, args.theta, args.grid)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    cfg = {"cm": args.cm, "theta": args.theta, "grid": args.grid}
    _emit(args, surface.to_csv(), manifest("scan", cfg, 0))
    return 0


def cmd_confidence(args) -> int:
    gamma = _read_cm(args.cm)
    try:
        settings = settings_from_json(Path(args.settings).read_text(encoding="utf-8"))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliError(f"cannot read settings from {args.settings}: {exc}") from None
    if args.count is not None:
        settings = settings[:args.count]
    n_modes = n_modes_of(gamma)
    if not settings or any(s.modes != n_modes for s in settings):
        raise CliError(f"settings must be a nonempty list of {n_modes}-mode settings")
    parts = check_partition(_partition(args.partition) or (n_modes // 2, n_modes - n_modes // 2),
                            n_modes)
    res = optimize(WitnessProblem(records_for(gamma, settings), parts))
    if res.c is None or not res.value < 1:
        raise CliError(f"no witness value below 1 with these settings (status {res.status})")
    m = np.array([r.m for r in records_for(gamma, settings)])
    ns = _n_range(args.n_range)
    upper = upper_confidence(res.value, res.c, m, ns, args.ksigma)
    cfg = {"cm": args.cm, "settings": args.settings, "count": len(settings),
           "partition": list(parts), "ksigma": args.ksigma, "n_range": args.n_range}
    meta = manifest("confidence", cfg, 0)
    meta["witness_value"] = res.value
    meta["sum_c2m2"] = float(np.sum(res.c**2 * m**2))
    meta["n_required"] = repetitions_for_confidence(res.value, res.c, m, args.ksigma)
    _emit(args, confidence_csv(ns, upper), meta)
    return 0


# ---- parser -----------------------------------------------------------------

def _add_detection_flags(p) -> None:
    p.add_argument("--partition", help="comma-separated modes per party, e.g. 2,2")
    p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--max-settings", type=int, help="setting budget (default twice the "
                   "number of independent second moments)")
    p.add_argument("--noise", type=int, help="simulate this many readings per setting "
                   "instead of exact variances")
    p.add_argument("--ksigma", type=float, default=3.0)
    p.add_argument("--search", choices=(BISECT, SEQUENTIAL), default=BISECT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvwitness", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a covariance matrix or a settings list as JSON")
    gen_sub = gen.add_subparsers(dest="state", required=True)
    p = gen_sub.add_parser("squeezed-vacuum")
    p.add_argument("--r", type=float, required=True)
    gen_sub.add_parser("bound4")
    p = gen_sub.add_parser("random")
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--nu-max", type=float, default=5.0)
    p.add_argument("--r-max", type=float, default=2.0)
    p.add_argument("--seed", type=int)
    p = gen_sub.add_parser("settings", help="uniformly random homodyne settings")
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    for p in gen_sub.choices.values():
        p.add_argument("--out")
    gen.set_defaults(func=cmd_gen)

    p = sub.add_parser("detect", help="random-measurement detection on one CM")
    p.add_argument("--cm", required=True)
    _add_detection_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("montecarlo", help="histogram of settings needed for detection")
    p.add_argument("--family", choices=(SQUEEZED, RANDOM, BOUND4), required=True)
    p.add_argument("--trials", type=int, required=True, help="per r value for squeezed")
    p.add_argument("--r-values", type=float, nargs="+", default=[0.2, 1.0, 1.8])
    p.add_argument("--modes", type=int, default=2)
    p.add_argument("--nu-max", type=float, default=5.0)
    p.add_argument("--r-max", type=float, default=2.0)
    p.add_argument("--workers", type=int, default=1)
    _add_detection_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("scan", help="two-mode variance surface as CSV")
    p.add_argument("--cm", required=True)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--grid", type=int, default=201)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("confidence", help="upper confidence bound versus repetitions")
    p.add_argument("--cm", required=True)
    p.add_argument("--settings", required=True, help="settings JSON (see gen settings)")
    p.add_argument("--count", type=int, help="use only the first COUNT settings")
    p.add_argument("--partition")
    p.add_argument("--ksigma", type=float, default=3.0)
    p.add_argument("--n-range", default="100:5000:100", help="lo:hi[:step]")
    p.add_argument("--out")
    p.set_defaults(func=cmd_confidence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else 0
    args.started = time.time()
    try:
        return args.func(args)
    except (CliError, ValueError) as exc:
        print(f"cvwitness: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
