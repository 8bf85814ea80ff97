"""Command-line surface tying the pipeline together.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 backend failure.
Every report CSV starts with a comment line recording the seed and the tool
version so any randomized run can be replayed.
"""

from __future__ import annotations

import argparse
import csv
import os
import re
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .backends import (
    DryRunBackend,
    SimulatedBackend,
    SimulatedLink,
    TcBackend,
    simulate_download,
)
from .emulator import (
    Clock,
    MonotonicClock,
    VirtualClock,
    parse_scenario,
    run_fixed,
    run_periodic,
    run_simple,
    run_static,
    run_trace,
    simple_params,
    static_preset,
)
from .errors import BackendError, ErrantError, FitError, FormatError
from .ingest import parse_speedtests, write_rejects
from .kde import EmulationParams, KdeModel, fit, sample
from .model_store import ModelBundle, load, save
from .profiles import Profile, ProfileKey, build_profiles, filter_profiles
from .validation import compare_distributions, subsample_experiment


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors reported as exit status 1."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _resolve_seed(args: argparse.Namespace) -> int:
    seed = getattr(args, "seed", None)
    if seed is not None:
        return seed
    # entropy-derived default, printed in every report for replay
    return int.from_bytes(os.urandom(4), "little")


def _parse_size(text: str) -> int:
    """Parse an object size like ``10MB`` (decimal units) into bytes."""
    match = re.fullmatch(r"\s*([0-9]+(?:\.[0-9]+)?)\s*([kKmMgG]?)[bB]?\s*", text)
    if not match:
        raise ValueError(f"cannot parse object size {text!r}; use e.g. 500kB or 10MB")
    scale = {"": 1, "k": 10**3, "m": 10**6, "g": 10**9}[match.group(2).lower()]
    size = int(float(match.group(1)) * scale)
    if size <= 0:
        raise ValueError("object size must be positive")
    return size


def _parse_schema(pairs: Optional[list[str]]) -> Optional[dict[str, str]]:
    if not pairs:
        return None
    schema = {}
    for pair in pairs:
        canonical, separator, actual = pair.partition("=")
        if not separator or not canonical or not actual:
            raise ValueError(f"bad --column mapping {pair!r}; use canonical=actual")
        schema[canonical.strip()] = actual.strip()
    return schema


def _profile_key(text: str) -> ProfileKey:
    return ProfileKey.from_string(text)


def _model_for(bundle: ModelBundle, key: ProfileKey) -> KdeModel:
    model = bundle.models.get(key)
    if model is None:
        available = ", ".join(sorted(k.as_string() for k in bundle.models)) or "none"
        raise ValueError(
            f"profile {key.as_string()} not in model file; available: {available}"
        )
    return model


def _make_backend(args: argparse.Namespace) -> tuple:
    """Build (backend, clock, label) from the --iface/--backend flags."""
    all_egress = getattr(args, "all_egress", False)
    if getattr(args, "iface", None):
        if hasattr(os, "geteuid") and os.geteuid() != 0:
            raise BackendError(
                "shaping a real interface requires root; rerun with sudo "
                "or use --backend dry-run or simulated"
            )
        return TcBackend(args.iface, all_egress=all_egress), MonotonicClock(), f"tc:{args.iface}"
    if args.backend == "simulated":
        return SimulatedBackend(), VirtualClock(), "simulated"
    return DryRunBackend(all_egress=all_egress), VirtualClock(), "dry-run"


def _print_report(report, backend) -> None:
    sys.stdout.write(report.to_text())
    if isinstance(backend, DryRunBackend):
        for command in backend.log:
            print(f"# $ {command}")


def _cmd_build_models(args: argparse.Namespace) -> int:
    schema = _parse_schema(args.column)
    with open(args.input, encoding="utf-8", newline="") as handle:
        records, rejects = parse_speedtests(handle, schema=schema)
    if rejects:
        total = len(records) + len(rejects)
        print(f"rejected {len(rejects)} of {total} rows", file=sys.stderr)
        if args.write_rejects:
            with open(args.input, encoding="utf-8", newline="") as handle:
                header = next(csv.reader(handle), [])
            rejects_path = f"{args.input}.rejects.csv"
            write_rejects(rejects, rejects_path, header)
            print(f"wrote {rejects_path}", file=sys.stderr)
    profiles = filter_profiles(build_profiles(records), args.min_samples)
    models = {}
    for key in sorted(profiles, key=ProfileKey.as_string):
        try:
            models[key] = fit(profiles[key].samples)
        except FitError as exc:
            print(f"skipping {key.as_string()}: {exc}", file=sys.stderr)
    if not models:
        raise FormatError(f"no profiles survive filter (min_samples={args.min_samples})")
    bundle = ModelBundle(
        models=models, created=datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    save(bundle, args.output)
    for key in sorted(models, key=ProfileKey.as_string):
        model = models[key]
        print(f"{key.as_string()}: n={model.n} bandwidth_factor={model.bandwidth_factor:.5f}")
    print(f"saved {len(models)} models to {args.output}")
    return 0


def _cmd_list_profiles(args: argparse.Namespace) -> int:
    bundle = load(args.models)
    print("profile,n,median_download_kbps,median_upload_kbps,median_latency_ms")
    for key in sorted(bundle.models, key=ProfileKey.as_string):
        model = bundle.models[key]
        medians = np.median(model.points, axis=0)
        print(
            f"{key.as_string()},{model.n},"
            f"{float(medians[0])!r},{float(medians[1])!r},{float(medians[2])!r}"
        )
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    if args.preset and (args.models or args.profile or args.simple or args.period):
        print(
            "error: --preset replaces --models/--profile and takes no "
            "--simple or --period",
            file=sys.stderr,
        )
        return 1
    if not args.preset and (not args.models or not args.profile):
        print("error: either --preset or both --models and --profile", file=sys.stderr)
        return 1
    if args.simple and args.period:
        print("error: --simple holds constant parameters; --period does not apply", file=sys.stderr)
        return 1
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    backend, clock, label = _make_backend(args)
    notes = {"version": __version__, "seed": str(seed), "backend": label}
    if args.preset:
        tool, _, name = args.preset.partition(":")
        preset = static_preset(tool, name)
        params = EmulationParams(
            preset.download_kbps, preset.upload_kbps, preset.latency_ms
        )
        notes["preset"] = preset.name
        notes["mode"] = "static"
        report = run_static(params, backend, args.duration, clock)
    else:
        bundle = load(args.models)
        key = _profile_key(args.profile)
        model = _model_for(bundle, key)
        notes["profile"] = key.as_string()
        if args.simple:
            baseline = simple_params(Profile(key, model.points))
            notes["mode"] = "simple"
            report = run_simple(baseline, backend, args.duration, clock)
        elif args.period is not None:
            notes["mode"] = f"periodic:{args.period:g}"
            report = run_periodic(model, backend, args.duration, args.period, rng, clock)
        else:
            notes["mode"] = "fixed"
            report = run_fixed(model, backend, args.duration, rng, clock)
    report.seed = seed
    report.notes = notes
    _print_report(report, backend)
    return 0


def _cmd_trace_run(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    bundle = load(args.models)
    scenario = parse_scenario(Path(args.scenario).read_text(encoding="utf-8"))
    backend, clock, label = _make_backend(args)
    report = run_trace(scenario, bundle, backend, rng, clock)
    report.seed = seed
    report.notes = {
        "version": __version__,
        "seed": str(seed),
        "backend": label,
        "scenario": args.scenario,
    }
    _print_report(report, backend)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    bundle = load(args.models)
    key = _profile_key(args.profile)
    model = _model_for(bundle, key)
    size_bytes = _parse_size(args.object_size)
    if args.downloads < 1:
        raise ValueError("--downloads must be positive")

    if args.simple:
        baseline = simple_params(Profile(key, model.points))
        # the fluid model is deterministic, so the Gaussian latency collapses
        # to its mean and every download sees identical parameters
        draws = [baseline.as_emulation_params()] * args.downloads
    else:
        draws = sample(model, rng, args.downloads)

    lines = [
        f"# seed={seed} version={__version__}",
        "download,download_kbps,upload_kbps,latency_ms,duration_s,avg_speed_kbps",
    ]
    speeds = []
    for number, params in enumerate(draws, start=1):
        link = SimulatedLink(
            params.download_kbps, params.upload_kbps, params.latency_ms, args.setup_rtts
        )
        duration, speed = simulate_download(link, size_bytes)
        speeds.append(speed)
        lines.append(
            f"{number},{params.download_kbps!r},{params.upload_kbps!r},"
            f"{params.latency_ms!r},{duration!r},{speed!r}"
        )
    csv_text = "\n".join(lines) + "\n"

    # reference: the stored measurements pushed through the same fluid model
    observed = [
        simulate_download(SimulatedLink(p[0], p[1], p[2], args.setup_rtts), size_bytes)[1]
        for p in model.points
    ]
    comparison = compare_distributions(observed, speeds)
    if args.output:
        Path(args.output).write_text(csv_text, encoding="utf-8")
        sys.stdout.write(comparison.to_text())
    else:
        sys.stdout.write(csv_text)
        for line in comparison.to_text().splitlines():
            print(f"# {line}")
    return 0


def _cmd_subsample(args: argparse.Namespace) -> int:
    if bool(args.models) == bool(args.input):
        print("error: exactly one of --models or --input", file=sys.stderr)
        return 1
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    key = _profile_key(args.profile)
    if args.models:
        bundle = load(args.models)
        profile = Profile(key, _model_for(bundle, key).points)
    else:
        with open(args.input, encoding="utf-8", newline="") as handle:
            records, _ = parse_speedtests(handle)
        profiles = build_profiles(records)
        if key not in profiles:
            available = ", ".join(sorted(k.as_string() for k in profiles)) or "none"
            raise ValueError(
                f"profile {key.as_string()} not present in input; available: {available}"
            )
        profile = profiles[key]
    sizes = [int(part) for part in args.sizes.split(",") if part.strip()]
    report = subsample_experiment(
        profile, sizes, repetitions=args.reps, cap=args.cap, rng=rng
    )
    csv_text = report.to_csv(comment=f"seed={seed} version={__version__}")
    if args.output:
        Path(args.output).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--iface", help="real egress interface to shape (needs root)")
    group.add_argument(
        "--backend",
        choices=("dry-run", "simulated"),
        default="dry-run",
        help="non-executing backend (default: dry-run)",
    )
    parser.add_argument(
        "--all-egress",
        action="store_true",
        help="place the full latency on egress instead of splitting per direction",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="errant", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    build = subparsers.add_parser("build-models", help="fit models from a speed-test CSV")
    build.add_argument("--input", required=True, help="speed-test CSV file")
    build.add_argument("--output", required=True, help="model file to write")
    build.add_argument("--min-samples", type=int, default=100)
    build.add_argument(
        "--column",
        action="append",
        metavar="CANONICAL=ACTUAL",
        help="map a canonical column name to the file's name (repeatable)",
    )
    build.add_argument(
        "--write-rejects",
        action="store_true",
        help="write rejected rows to <input>.rejects.csv with reasons",
    )
    build.set_defaults(func=_cmd_build_models)

    listing = subparsers.add_parser("list-profiles", help="show profiles in a model file")
    listing.add_argument("--models", required=True)
    listing.set_defaults(func=_cmd_list_profiles)

    run = subparsers.add_parser("run", help="emulate one profile or preset")
    run.add_argument("--models")
    run.add_argument("--profile", help="profile key, e.g. specific/norway/telia/4G/good")
    run.add_argument("--preset", metavar="TOOL:NAME", help="static preset instead of a model")
    run.add_argument("--duration", type=float, required=True, help="run length in seconds")
    run.add_argument("--period", type=float, help="resample every PERIOD seconds")
    run.add_argument("--simple", action="store_true", help="average-value baseline mode")
    run.add_argument("--seed", type=int)
    _add_backend_flags(run)
    run.set_defaults(func=_cmd_run)

    trace = subparsers.add_parser("trace-run", help="run a multi-step scenario file")
    trace.add_argument("--models", required=True)
    trace.add_argument("--scenario", required=True, help="scenario file, one step per line")
    trace.add_argument("--seed", type=int)
    _add_backend_flags(trace)
    trace.set_defaults(func=_cmd_trace_run)

    validate = subparsers.add_parser(
        "validate", help="simulate downloads and compare against the source data"
    )
    validate.add_argument("--models", required=True)
    validate.add_argument("--profile", required=True)
    validate.add_argument("--downloads", type=int, default=1000)
    validate.add_argument("--object-size", default="10MB")
    validate.add_argument("--simple", action="store_true")
    validate.add_argument("--setup-rtts", type=int, default=2)
    validate.add_argument("--seed", type=int)
    validate.add_argument("--output", help="write the per-download CSV here")
    validate.set_defaults(func=_cmd_validate)

    subsample = subparsers.add_parser(
        "subsample", help="KS distance of random subsets against a reference set"
    )
    subsample.add_argument("--models")
    subsample.add_argument("--input", help="speed-test CSV instead of a model file")
    subsample.add_argument("--profile", required=True)
    subsample.add_argument("--sizes", default="10,100,1000")
    subsample.add_argument("--reps", type=int, default=100)
    subsample.add_argument("--cap", type=int, default=10000)
    subsample.add_argument("--seed", type=int)
    subsample.add_argument("--output", help="write the CSV here instead of stdout")
    subsample.set_defaults(func=_cmd_subsample)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = args.func(args)
        sys.stdout.flush()  # surface EPIPE here, while it is still catchable
        return code
    except BrokenPipeError:
        # the reader went away (e.g. piping into head); point the dead stream
        # at devnull so the interpreter's exit-time flush stays quiet
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ErrantError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
