import json
import math

import pytest

from novikov.dynamics import DEFAULT_OPTIONS, RationalDirection
from novikov.errors import ScanFormatError
from novikov.homology import ZoneLabel, apply_signed_permutation, canonical_label, signed_permutations
from novikov.scanner import (
    SCHEMA_VERSION,
    Diagnostics,
    DirectionRecord,
    ScanResult,
    classify_direction,
    default_workers,
    enumerate_grid,
    read_scan,
    scan,
    write_scan,
)

from .conftest import random_directions


def test_enumerate_grid_small():
    g = enumerate_grid(1)
    assert [(d.m, d.n, d.N) for d in g] == [(0, 0, 1), (0, 1, 1), (1, 1, 1)]
    g2 = enumerate_grid(2)
    assert len(g2) == 6
    assert g2[-1].h == (1, 1, 1)


@pytest.mark.parametrize("N", [1, 2, 7, 400])
def test_enumerate_grid_count(N):
    g = enumerate_grid(N)
    assert len(g) == (N + 1) * (N + 2) // 2
    pairs = [(d.m, d.n) for d in g]
    assert pairs == sorted(pairs) and len(set(pairs)) == len(pairs)
    assert all(0 <= d.m <= d.n <= N for d in g)
    assert all(math.gcd(*d.h) == 1 for d in g)


def test_classify_z(f):
    rec = classify_direction(f, 0.0, RationalDirection(0, 0, 1))
    assert rec.label == ZoneLabel.zone((0, 0, 1))
    assert rec.diagnostics.saddle_count == 4


def test_classify_null(f):
    rec = classify_direction(f, 2.5, RationalDirection(0, 0, 1))
    assert rec.label == ZoneLabel.null()
    assert rec.diagnostics.critical_count == 2 and rec.diagnostics.saddle_count == 0


def test_classify_monkey_saddle_direction(f):
    rec = classify_direction(f, 0.0, RationalDirection(1, 1, 1))
    assert rec.label == ZoneLabel.zone((1, 1, 1))


def test_memoization_by_primitive_h(f):
    cache = {}
    a = classify_direction(f, 0.0, RationalDirection(1, 2, 4), cache=cache)
    b = classify_direction(f, 0.0, RationalDirection(2, 4, 8), cache=cache)
    assert len(cache) == 1
    assert a.label == b.label and a.diagnostics == b.diagnostics and a.h == b.h
    assert (b.m, b.n, b.N) == (2, 4, 8)


def test_classify_never_raises_on_solver_failure(f):
    # an impossibly small arc budget makes every trace fail
    from dataclasses import replace
    opts = replace(DEFAULT_OPTIONS, max_len_factor=1e-6)
    rec = classify_direction(f, 0.0, RationalDirection(1, 2, 5), opts)
    assert rec.label.is_unresolved
    assert rec.diagnostics.error


@pytest.mark.parametrize("h", [(0, 1, 2), (1, 2, 3), (1, 1, 2), (2, 3, 5)])
def test_signed_permutation_equivariance(f, h):
    ref = classify_direction(f, 0.0, RationalDirection.from_vector(h)).label
    for perm, signs in list(signed_permutations())[::7]:
        g = apply_signed_permutation(h, perm, signs)
        lab = classify_direction(f, 0.0, RationalDirection.from_vector(g)).label
        assert lab == ref, (g, lab, ref)


def test_label_canonical(f):
    for h in random_directions(6, seed=3, bound=6):
        lab = classify_direction(f, 0.0, RationalDirection.from_vector(h)).label
        if lab.is_zone:
            assert lab.miller == canonical_label(lab.miller)
            assert math.gcd(*lab.miller) == 1


def test_scan_n1(f, tmp_path):
    out = tmp_path / "s.jsonl"
    res = scan(f, 0.0, 1, out=out)
    assert len(res.records) == 3
    assert res.records[0].label == ZoneLabel.zone((0, 0, 1))
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    header = json.loads(lines[0])
    assert header["schema_version"] == SCHEMA_VERSION and header["N"] == 1 and header["surface"] == "simple-cubic"
    assert set(json.loads(lines[1])) == {"m", "n", "N", "h", "label", "diag"}


def test_scan_roundtrip(f, tmp_path):
    out = tmp_path / "s.jsonl"
    res = scan(f, 0.0, 3, out=out)
    back = read_scan(out)
    assert back == res
    out2 = tmp_path / "t.jsonl"
    write_scan(back, out2)
    assert out2.read_bytes() == out.read_bytes()


def test_scan_deterministic_across_workers(f, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    scan(f, 0.0, 4, worker_count=1, out=a)
    scan(f, 0.0, 4, worker_count=3, out=b)
    assert a.read_bytes() == b.read_bytes()


class _Stop(Exception):
    pass


def test_resume_after_interrupt(f, tmp_path):
    clean, partial = tmp_path / "clean.jsonl", tmp_path / "partial.jsonl"
    scan(f, 0.0, 4, out=clean)

    def boom(done, total, elapsed):
        if done == 4:
            raise _Stop

    with pytest.raises(_Stop):
        scan(f, 0.0, 4, out=partial, progress=boom)
    # simulate a kill in the middle of a write
    with open(partial, "a") as fh:
        fh.write('{"N":4,"diag":{"crit')
    n_before = len(partial.read_text().splitlines())
    assert 1 < n_before < 16
    seen = []
    scan(f, 0.0, 4, out=partial, resume=True, progress=lambda d, t, e: seen.append(t))
    assert partial.read_bytes() == clean.read_bytes()
    # the 4 completed directions were not recomputed
    assert seen and seen[-1] == len({d.h for d in enumerate_grid(4)}) - 4


def test_resume_rejects_other_config(f, tmp_path):
    out = tmp_path / "s.jsonl"
    scan(f, 0.0, 1, out=out)
    with pytest.raises(ScanFormatError):
        scan(f, 0.5, 1, out=out, resume=True)


def test_read_scan_errors(f, tmp_path):
    out = tmp_path / "s.jsonl"
    scan(f, 0.0, 2, out=out)
    text = out.read_text()
    bad = tmp_path / "trunc.jsonl"
    bad.write_text(text[:-30])
    with pytest.raises(ScanFormatError, match="line 7"):
        read_scan(bad)
    lines = text.splitlines()
    short = tmp_path / "short.jsonl"
    short.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(ScanFormatError, match="expected the 6"):
        read_scan(short)
    garbled = tmp_path / "garbled.jsonl"
    garbled.write_text("\n".join(lines[:3] + ["{oops"] + lines[4:]) + "\n")
    with pytest.raises(ScanFormatError, match="line 4"):
        read_scan(garbled)
    other = tmp_path / "v2.jsonl"
    header = json.loads(lines[0])
    header["schema_version"] = 99
    other.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    with pytest.raises(ScanFormatError, match="schema_version mismatch"):
        read_scan(other)
    with pytest.raises(ScanFormatError):
        read_scan(tmp_path / "missing.jsonl")


def test_diagnostics_exclude_timing():
    d = Diagnostics(4, 4, 10, 1e-15, elapsed_ms=12.5)
    assert "elapsed_ms" not in d.to_json()
    assert Diagnostics.from_json(d.to_json()) == d


def test_record_json_roundtrip():
    r = DirectionRecord(1, 2, 4, (1, 2, 4), ZoneLabel.unresolved("RankOne"), Diagnostics(4, 4, 7, 0.0))
    assert DirectionRecord.from_json(json.loads(json.dumps(r.to_json()))) == r


def test_scan_result_validate():
    s = ScanResult(1, 0.0, "x", {}, [])
    with pytest.raises(ScanFormatError):
        s.validate()


def test_default_workers(monkeypatch):
    monkeypatch.setenv("NOVIKOV_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("NOVIKOV_WORKERS", "junk")
    assert default_workers() >= 1
    monkeypatch.delenv("NOVIKOV_WORKERS")
    assert default_workers() >= 1


def test_scan_rejects_bad_arguments(f):
    with pytest.raises(ValueError):
        scan(f, 0.0, 0)
    with pytest.raises(ValueError):
        scan(f, 0.0, 2, worker_count=0)
