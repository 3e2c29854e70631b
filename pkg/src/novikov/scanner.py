"""Scan the rational direction grid (m/N, n/N, 1) and label every cell."""

from __future__ import annotations

import json
import multiprocessing as mp
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from . import __version__
from .dynamics import (
    DEFAULT_OPTIONS,
    SADDLE,
    RationalDirection,
    CylinderProbe,
    TraceOptions,
    carrier_cycles,
    find_critical_points,
    open_edges,
    sample_regular_orbits,
    trace_separatrix_graph,
    trace_transverse_links,
)
from .errors import (
    DanglingSeparatrix,
    DegenerateBranching,
    NovikovError,
    ScanFormatError,
)
from .homology import ZoneLabel, canonical_label, cycle_lattice, miller_from_lattice
from .surface import DispersionRelation

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Diagnostics:
    critical_count: int = 0
    saddle_count: int = 0
    orbit_count: int = 0
    max_residual: float = 0.0
    energy_nudge: float = 0.0
    error: str = ""
    elapsed_ms: float = field(default=0.0, compare=False)

    def to_json(self) -> dict:
        # elapsed time stays out of the file so scans are byte-reproducible
        d = {
            "critical_count": self.critical_count,
            "saddle_count": self.saddle_count,
            "orbit_count": self.orbit_count,
            "max_residual": self.max_residual,
        }
        if self.energy_nudge:
            d["energy_nudge"] = self.energy_nudge
        if self.error:
            d["error"] = self.error
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Diagnostics":
        return cls(
            critical_count=int(d["critical_count"]),
            saddle_count=int(d["saddle_count"]),
            orbit_count=int(d["orbit_count"]),
            max_residual=float(d["max_residual"]),
            energy_nudge=float(d.get("energy_nudge", 0.0)),
            error=str(d.get("error", "")),
        )


@dataclass(frozen=True)
class DirectionRecord:
    m: int
    n: int
    N: int
    h: tuple[int, int, int]
    label: ZoneLabel
    diagnostics: Diagnostics

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "N": self.N,
            "h": list(self.h),
            "label": self.label.to_json(),
            "diag": self.diagnostics.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "DirectionRecord":
        return cls(
            m=int(d["m"]),
            n=int(d["n"]),
            N=int(d["N"]),
            h=tuple(int(c) for c in d["h"]),
            label=ZoneLabel.from_json(d["label"]),
            diagnostics=Diagnostics.from_json(d["diag"]),
        )


@dataclass
class ScanResult:
    N: int
    E: float
    surface_name: str
    tolerances: dict
    records: list[DirectionRecord]
    tool_version: str = __version__

    def header(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "surface": self.surface_name,
            "E": self.E,
            "N": self.N,
            "tolerances": self.tolerances,
            "tool_version": self.tool_version,
        }

    def labels(self) -> dict[tuple[int, int], ZoneLabel]:
        return {(r.m, r.n): r.label for r in self.records}

    def validate(self):
        expected = list(grid_pairs(self.N))
        got = [(r.m, r.n) for r in self.records]
        if got != expected:
            raise ScanFormatError(
                f"scan has {len(got)} records, expected the {len(expected)} grid cells in (m,n) order")


def grid_pairs(N: int) -> Iterator[tuple[int, int]]:
    for m in range(N + 1):
        for n in range(m, N + 1):
            yield m, n


def enumerate_grid(N: int) -> list[RationalDirection]:
    """All directions (m/N, n/N, 1) with 0 <= m <= n <= N, lexicographic in (m, n)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return [RationalDirection(m, n, N) for m, n in grid_pairs(N)]


# ---------------------------------------------------------------------------
# single direction

def carrier_lattice(f, E, direction, crit, graphs, orbits, opts):
    """Cycle lattice of the open-orbit carrier, or of the critical graphs when no orbit is open.

    Returns the lattice and every orbit traced along the way.
    """
    probe = CylinderProbe(f, E, direction, crit, opts, orbits)
    mask = open_edges(graphs, probe)
    links = trace_transverse_links(f, E, direction, crit, graphs, opts, probe=probe)
    open_orbits = [o for o in probe.orbits if any(o.winding)]
    if open_orbits or links or any(any(m) for m in mask):
        lattice = cycle_lattice((), open_orbits, direction.h, transverse=carrier_cycles(graphs, links, mask))
    else:
        lattice = cycle_lattice(graphs, probe.orbits, direction.h)
    return lattice, probe.orbits


def _pipeline(f: DispersionRelation, E: float, direction: RationalDirection, opts: TraceOptions,
              symmetric: bool):
    crit = []
    orbits = []
    try:
        crit = find_critical_points(f, E, direction, opts)
        graphs = trace_separatrix_graph(f, E, direction, crit, opts)
        orbits = sample_regular_orbits(f, E, direction, [c.phase for c in crit], opts)
        lattice, orbits = carrier_lattice(f, E, direction, crit, graphs, orbits, opts)
        label = miller_from_lattice(lattice)
        if label.is_zone:
            label = ZoneLabel.zone(canonical_label(label.miller, symmetric))
        error = ""
    except DanglingSeparatrix as exc:
        label, error = ZoneLabel.unresolved("DanglingSeparatrix"), str(exc)
    except DegenerateBranching as exc:
        label, error = ZoneLabel.unresolved("Degenerate"), str(exc)
    except (NovikovError, ValueError, FloatingPointError, ZeroDivisionError) as exc:
        label, error = ZoneLabel.unresolved("SolverFailure"), f"{type(exc).__name__}: {exc}"
    return label, error, crit, orbits


def _classify_h(f: DispersionRelation, E: float, h, opts: TraceOptions, symmetric: bool):
    """Label and diagnostics for a primitive direction; errors become Unresolved labels."""
    direction = RationalDirection.from_vector(h)
    label, error, crit, orbits = _pipeline(f, E, direction, opts, symmetric)
    nudge = 0.0
    if label.is_unresolved and label.reason == "RankThree" and opts.energy_nudge > 0:
        # carriers glued by saddle connections at coinciding critical levels;
        # a small energy shift puts the levels in general position
        up = _pipeline(f, E + opts.energy_nudge, direction, opts, symmetric)[0]
        down = _pipeline(f, E - opts.energy_nudge, direction, opts, symmetric)[0]
        if up == down:
            label, nudge = up, opts.energy_nudge
    residual = max((max(o.closure_residual, o.max_f_residual, o.max_plane_drift) for o in orbits),
                   default=0.0)
    diag = Diagnostics(
        critical_count=len(crit),
        saddle_count=sum(1 for c in crit if c.kind == SADDLE),
        orbit_count=len(orbits),
        max_residual=float(residual),
        energy_nudge=nudge,
        error=error,
    )
    return label, diag


def classify_direction(f: DispersionRelation, E: float, direction: RationalDirection,
                       opts: TraceOptions = DEFAULT_OPTIONS, cache: dict | None = None,
                       symmetric: bool | None = None) -> DirectionRecord:
    """Run the full pipeline for one grid direction.  Never raises for numerical failures."""
    h = direction.h
    if cache is not None and h in cache:
        label, diag = cache[h]
    else:
        if symmetric is None:
            symmetric = f.is_cubic_symmetric()
        t0 = time.perf_counter()
        label, diag = _classify_h(f, E, h, opts, symmetric)
        diag = Diagnostics(**{**diag.__dict__, "elapsed_ms": 1e3 * (time.perf_counter() - t0)})
        if cache is not None:
            cache[h] = (label, diag)
    return DirectionRecord(direction.m, direction.n, direction.N, h, label, diag)


# ---------------------------------------------------------------------------
# scanning

_WORKER: dict = {}


def _worker_init(f, E, opts, symmetric):
    _WORKER.update(f=f, E=E, opts=opts, symmetric=symmetric)


def _worker_run(h):
    w = _WORKER
    t0 = time.perf_counter()
    label, diag = _classify_h(w["f"], w["E"], h, w["opts"], w["symmetric"])
    diag = Diagnostics(**{**diag.__dict__, "elapsed_ms": 1e3 * (time.perf_counter() - t0)})
    return h, label, diag


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True)


def read_scan(path, allow_partial: bool = False) -> ScanResult:
    """Parse a JSONL scan file.  Partial files (interrupted scans) are accepted on request."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScanFormatError(f"cannot read {path}: {exc.strerror}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines and not allow_partial:
        raise ScanFormatError(f"line {len(lines)}: truncated record (no trailing newline)")
    elif lines:
        lines.pop()  # drop a half-written last line
    if not lines:
        raise ScanFormatError("line 1: empty file, expected a header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScanFormatError(f"line 1: bad header: {exc.msg}") from None
    if not isinstance(header, dict) or header.get("schema_version") != SCHEMA_VERSION:
        got = header.get("schema_version") if isinstance(header, dict) else None
        raise ScanFormatError(f"line 1: schema_version mismatch (file {got!r}, expected {SCHEMA_VERSION})")
    try:
        N = int(header["N"])
        E = float(header["E"])
        surface = str(header["surface"])
        tolerances = dict(header["tolerances"])
        tool_version = str(header["tool_version"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ScanFormatError(f"line 1: header field missing or invalid: {exc}") from None
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            records.append(DirectionRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScanFormatError(f"line {lineno}: bad record: {exc}") from None
    result = ScanResult(N, E, surface, tolerances, records, tool_version)
    if allow_partial:
        expected = list(grid_pairs(N))[:len(records)]
        if [(r.m, r.n) for r in records] != expected:
            raise ScanFormatError("partial scan records are not a prefix of the grid order")
    else:
        result.validate()
    return result


def write_scan(result: ScanResult, path):
    with open(path, "w") as fh:
        fh.write(_dumps(result.header()) + "\n")
        for r in result.records:
            fh.write(_dumps(r.to_json()) + "\n")


def scan(f: DispersionRelation, E: float, N: int, opts: TraceOptions = DEFAULT_OPTIONS,
         worker_count: int = 1, out=None, resume: bool = False,
         progress: Callable[[int, int, float], None] | None = None) -> ScanResult:
    """Classify every cell of the N-grid.

    Records are produced in (m, n) order whatever the completion order of the
    workers, and each is appended to ``out`` as soon as it and all its
    predecessors are known, so an interrupted file is always a valid prefix.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if worker_count < 1:
        raise ValueError("worker_count must be at least 1")
    dirs = enumerate_grid(N)
    header = ScanResult(N, float(E), f.name, opts.as_dict(), []).header()
    done: list[DirectionRecord] = []
    cache: dict = {}
    if out is not None and resume and Path(out).exists():
        prev = read_scan(out, allow_partial=True)
        if _dumps(prev.header()) != _dumps(header):
            raise ScanFormatError(f"{out}: header does not match this scan configuration")
        done = prev.records
        for r in done:
            cache.setdefault(r.h, (r.label, r.diagnostics))
    fh = None
    if out is not None:
        fh = open(out, "w")
        fh.write(_dumps(header) + "\n")
        for r in done:
            fh.write(_dumps(r.to_json()) + "\n")
        fh.flush()

    records = list(done)
    pending = dirs[len(done):]
    todo = []
    seen = set(cache)
    for d in pending:
        if d.h not in seen:
            seen.add(d.h)
            todo.append(d.h)
    symmetric = f.is_cubic_symmetric()
    t_start = time.perf_counter()
    pos = 0

    def flush():
        nonlocal pos
        while pos < len(pending) and pending[pos].h in cache:
            d = pending[pos]
            label, diag = cache[d.h]
            rec = DirectionRecord(d.m, d.n, d.N, d.h, label, diag)
            records.append(rec)
            if fh is not None:
                fh.write(_dumps(rec.to_json()) + "\n")
            pos += 1
        if fh is not None:
            fh.flush()

    try:
        flush()
        if worker_count == 1 or len(todo) < 2:
            _worker_init(f, E, opts, symmetric)
            results = map(_worker_run, todo)
            pool = None
        else:
            ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
            pool = ctx.Pool(worker_count, initializer=_worker_init, initargs=(f, E, opts, symmetric))
            results = pool.imap(_worker_run, todo, chunksize=1)
        try:
            for k, (h, label, diag) in enumerate(results, start=1):
                cache[h] = (label, diag)
                flush()
                if progress is not None:
                    progress(k, len(todo), time.perf_counter() - t_start)
        finally:
            if pool is not None:
                pool.terminate()
                pool.join()
    finally:
        if fh is not None:
            fh.close()
    return ScanResult(N, float(E), f.name, opts.as_dict(), records)


def default_workers() -> int:
    env = os.environ.get("NOVIKOV_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            print(f"ignoring NOVIKOV_WORKERS={env!r}", file=sys.stderr)
    return os.cpu_count() or 1

