"""Command-line front end.

Exit codes: 0 success (classify: Zone or Null label), 1 bad arguments or I/O
or format errors, 2 classify produced an Unresolved label.  Payloads go to
standard output; progress and diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import __version__
from .areas import NORMALIZATIONS, zone_areas
from .dynamics import DEFAULT_OPTIONS, RationalDirection, TraceOptions
from .errors import DegenerateInput, NovikovError, ScanFormatError, SurfaceFormatError
from .fractal import scan_dimension
from .render import render_ppm, render_svg
from .scanner import classify_direction, default_workers, read_scan, scan
from .surface import load_surface

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNRESOLVED = 2

_BOOL_KEYS = {"resume"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for Unresolved here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _direction(text: str) -> RationalDirection:
    try:
        m, n, N = (int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected m,n,N integers, got {text!r}") from None
    if N < 1:
        raise argparse.ArgumentTypeError(f"N must be positive in m,n,N, got {text!r}")
    return RationalDirection(m, n, N)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _tolerance(text: str) -> tuple[str, object]:
    name, sep, value = text.partition("=")
    fields = {f.name: f for f in dataclasses.fields(TraceOptions)}
    if not sep or name not in fields:
        raise argparse.ArgumentTypeError(
            f"expected name=value with name one of {', '.join(fields)}, got {text!r}")
    kind = type(getattr(DEFAULT_OPTIONS, name))
    try:
        v = kind(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad value for {name}: {value!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{name} must be positive, got {value!r}")
    return name, v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="novikov", description="Stability zones of plane sections of a triply periodic surface.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="key=value file mirroring the flags; flags win")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def physics(sp):
        sp.add_argument("--surface", default="simple-cubic", help="built-in name or surface file")
        sp.add_argument("--energy", type=float, default=0.0, help="Fermi energy E (default 0)")
        sp.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                        help="override a tracing tolerance; repeatable")

    c = sub.add_parser("classify", help="label one direction (m/N, n/N, 1)")
    c.add_argument("--dir", type=_direction, required=True, metavar="m,n,N")
    physics(c)

    s = sub.add_parser("scan", help="label every direction of the N-grid")
    s.add_argument("--N", type=_positive_int, required=True)
    s.add_argument("--out", required=True, help="JSONL output (also the checkpoint)")
    s.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default NOVIKOV_WORKERS or the core count)")
    s.add_argument("--resume", action="store_true", help="continue an interrupted --out file")
    physics(s)

    r = sub.add_parser("report", help="zone areas or ergodic-set dimension of a scan")
    r.add_argument("what", choices=["areas", "fracdim"])
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--csv", help="write the CSV here instead of standard output")
    r.add_argument("--method", choices=["box", "sausage"], default="box")
    r.add_argument("--normalization", choices=NORMALIZATIONS, default="sphere",
                   help="area weights: solid angle (sphere) or flat chart area (chart)")

    v = sub.add_parser("render", help="draw the zone map")
    v.add_argument("--in", dest="input", required=True)
    v.add_argument("--svg")
    v.add_argument("--ppm")
    v.add_argument("--ppm-size", type=_positive_int, default=512)
    v.add_argument("--seed", type=int, default=0, help="palette seed")
    return p


def read_config(path) -> dict[str, str]:
    """Parse a key=value file; blank lines and lines starting with # are skipped."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = read_config(known.config)
    tols = [f"{k[4:]}={v}" for k, v in cfg.items() if k.startswith("tol.")]
    plain = {k: v for k, v in cfg.items() if not k.startswith("tol.")}
    if "in" in plain:
        plain["input"] = plain.pop("in")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    known_keys = set()
    for sp in subparsers.choices.values():
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for k, v in plain.items():
            if k not in dests:
                continue
            known_keys.add(k)
            action = dests[k]
            if k in _BOOL_KEYS:
                defaults[k] = v.lower() in ("1", "true", "yes", "on")
            elif action.type is not None:
                try:
                    defaults[k] = action.type(v)
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise UsageError(f"{known.config}: {k}: {exc}") from None
            else:
                defaults[k] = v
            # a config value satisfies a required flag
            action.required = False
        if "tol" in dests and tols:
            try:
                defaults["tol"] = [_tolerance(t) for t in tols]
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"{known.config}: {exc}") from None
        sp.set_defaults(**defaults)
    unknown = set(plain) - known_keys
    if unknown:
        raise UsageError(f"{known.config}: unknown keys {', '.join(sorted(unknown))}")


def _options(args) -> TraceOptions:
    # config tolerances come first so that repeated flags override them
    return dataclasses.replace(DEFAULT_OPTIONS, **dict(args.tol))


def cmd_classify(args) -> int:
    f = load_surface(args.surface)
    rec = classify_direction(f, args.energy, args.dir, _options(args))
    print(json.dumps(rec.to_json(), sort_keys=True))
    return EXIT_UNRESOLVED if rec.label.is_unresolved else EXIT_OK


def cmd_scan(args) -> int:
    f = load_surface(args.surface)
    workers = args.workers or default_workers()
    last = [0.0]

    def progress(done, total, elapsed):
        now = time.monotonic()
        if done == total or now - last[0] > 2.0:
            last[0] = now
            rate = done / elapsed if elapsed > 0 else 0.0
            print(f"\r{done}/{total} distinct directions, {rate:.1f}/s", end="", file=sys.stderr, flush=True)

    t0 = time.perf_counter()
    result = scan(f, args.energy, args.N, _options(args), worker_count=workers, out=args.out,
                  resume=args.resume, progress=progress)
    dt = time.perf_counter() - t0
    print(f"\n{len(result.records)} records in {dt:.1f} s -> {args.out}", file=sys.stderr)
    return EXIT_OK


def _write(path, text: str | bytes) -> None:
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(text)


def cmd_report(args) -> int:
    s = read_scan(args.input)
    if args.what == "areas":
        table = zone_areas(s, args.normalization)
        payload = table.to_csv()
        print(f"residual (Unresolved) area: {table.residual_area:.6g} ({args.normalization})", file=sys.stderr)
        if args.csv:
            _write(args.csv, payload)
        else:
            sys.stdout.write(payload)
        return EXIT_OK
    report = scan_dimension(s, args.method)
    sys.stdout.write(report.to_text())
    if args.csv:
        _write(args.csv, report.to_csv())
    return EXIT_OK


def cmd_render(args) -> int:
    if not args.svg and not args.ppm:
        raise UsageError("render: give --svg and/or --ppm")
    s = read_scan(args.input)
    if args.svg:
        _write(args.svg, render_svg(s, seed=args.seed))
    if args.ppm:
        _write(args.ppm, render_ppm(s, seed=args.seed, size=args.ppm_size))
    return EXIT_OK


COMMANDS = {"classify": cmd_classify, "scan": cmd_scan, "report": cmd_report, "render": cmd_render}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_ERROR
    except (ScanFormatError, SurfaceFormatError, DegenerateInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, NovikovError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("\ninterrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
