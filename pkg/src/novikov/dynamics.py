"""Plane sections of the level surface {f = E}: critical points, orbits, separatrix graphs.

A rational field direction ``h`` makes the height ``h.x`` a circle-valued
function on the surface.  Section curves are its level sets; they are traced
on the universal cover so that their lattice displacements (windings) are
exact integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from . import _kernels as kn
from .errors import (
    DanglingSeparatrix,
    DegenerateBranching,
    MaxArcLength,
    NoSurfaceIntersection,
    NotCritical,
    ProjectionFailure,
    SeedExhaustion,
)
from .homology import orthogonal_lattice, winding_from_lift
from .surface import DispersionRelation, TorusPoint, evaluate_jet, wrap_point

TWO_PI = 2.0 * math.pi

SADDLE = "Saddle"
EXTREMUM = "Extremum"
DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class TraceOptions:
    seed_grid: int = 10
    seed_grid_check: int = 14
    newton_tol: float = 1e-10
    dedup_tol: float = 1e-6
    cluster_tol: float = 1e-4
    tol_f: float = 1e-10
    tol_p: float = 1e-10
    tol_close: float = 1e-6
    tol_g: float = 1e-8
    tol_d: float = 1e-8
    tol_h: float = 1e-9
    rtol: float = 1e-9
    ds_max: float = 0.25
    capture_radius: float = 1e-4
    eps_branch: float = 1e-3
    saddle_exclusion: float = 1e-3
    max_len_factor: float = 1e3
    levels_per_gap: int = 2
    seeds_per_level: int = 4
    land_tol: float = 5e-2
    energy_nudge: float = 1e-3

    def max_len(self, h) -> float:
        return self.max_len_factor * math.sqrt(sum(c * c for c in h)) * TWO_PI

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


DEFAULT_OPTIONS = TraceOptions()


@dataclass(frozen=True)
class RationalDirection:
    """Field direction (m/N, n/N, 1), stored as the integer triple (m, n, N)."""

    m: int
    n: int
    N: int

    def __post_init__(self):
        if (self.m, self.n, self.N) == (0, 0, 0):
            raise ValueError("direction must be nonzero")

    @classmethod
    def from_vector(cls, v) -> "RationalDirection":
        a, b, c = (int(x) for x in v)
        return cls(a, b, c)

    @property
    def h(self) -> tuple[int, int, int]:
        g = math.gcd(self.m, self.n, self.N)
        return (self.m // g, self.n // g, self.N // g)

    @property
    def hv(self) -> np.ndarray:
        return np.array(self.h, dtype=np.float64)

    @property
    def unit(self) -> np.ndarray:
        v = self.hv
        return v / np.linalg.norm(v)

    @property
    def height_period(self) -> float:
        return TWO_PI / float(np.linalg.norm(self.hv))

    def plane_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal basis of the plane orthogonal to the direction."""
        u = self.unit
        a = np.zeros(3)
        a[int(np.argmin(np.abs(u)))] = 1.0
        p1 = a - (a @ u) * u
        p1 /= np.linalg.norm(p1)
        p2 = np.cross(u, p1)
        return p1, p2


@dataclass(frozen=True)
class CriticalPoint:
    point: TorusPoint
    mu: float
    kind: str
    height: float
    phase: float  # h.x modulo 2pi; same information as height, in lattice units
    det: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return self.point.position


@dataclass
class Orbit:
    samples: np.ndarray
    winding: tuple[int, int, int]
    level: float
    closure_residual: float
    arc_length: float
    max_f_residual: float = 0.0
    max_plane_drift: float = 0.0


@dataclass
class SeparatrixEdge:
    source: int
    target: int
    displacement: np.ndarray
    samples: np.ndarray
    source_branch: int = -1
    target_branch: int = -1


@dataclass
class SeparatrixGraph:
    vertices: list[int]
    edges: list[SeparatrixEdge]
    cycle_classes: list[tuple[int, int, int]]
    phase: float


@dataclass
class TransverseLink:
    """An ascending path through a region of open orbits, from one critical point to another."""

    source: int
    target: int
    displacement: np.ndarray
    cylinder_winding: tuple[int, int, int]


# ---------------------------------------------------------------------------
# pointwise geometry

def characteristic_velocity(f: DispersionRelation, direction: RationalDirection, x) -> np.ndarray:
    """grad f x unit: tangent to both the level surface and the section plane."""
    jet = evaluate_jet(f, x)
    return np.cross(jet.gradient, direction.unit)


def classify_critical(f: DispersionRelation, direction: RationalDirection, x,
                      opts: TraceOptions = DEFAULT_OPTIONS) -> tuple[str, float, float]:
    """Morse type of the height function at a critical point; returns (kind, mu, det)."""
    jet = evaluate_jet(f, np.asarray(x, dtype=float))
    u = direction.unit
    g = jet.gradient
    mu = float(g @ u)
    if np.linalg.norm(np.cross(g, u)) > max(opts.tol_g, 1e-6 * abs(mu)) or mu == 0.0:
        raise NotCritical(f"grad f is not parallel to the direction at {np.asarray(x).tolist()}")
    P = np.column_stack(direction.plane_basis())
    R = -(P.T @ jet.hessian @ P) / mu
    det = float(np.linalg.det(R))
    if det < -opts.tol_d:
        kind = SADDLE
    elif det > opts.tol_d:
        kind = EXTREMUM
    else:
        kind = DEGENERATE
    return kind, mu, det


def _phase(direction: RationalDirection, x) -> float:
    return float(np.mod(direction.hv @ np.asarray(x), TWO_PI))


# ---------------------------------------------------------------------------
# critical points

def _newton_from_grid(f, E, direction, n, opts):
    g = (np.arange(n) + 0.5) * TWO_PI / n
    seeds = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    p1, p2 = direction.plane_basis()
    pts, res = kn.newton_critical(f.K, f.A, f.B, float(E), p1, p2, seeds, 100, opts.newton_tol)
    keep = np.isfinite(res)
    pts, res = pts[keep], res[keep]
    if len(pts) == 0:
        return pts
    pts = np.where(pts >= TWO_PI, pts - TWO_PI, pts)
    # most seeds land on the same few points; collapse exact repeats first
    keys = np.round(pts / (0.1 * opts.dedup_tol)).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    pts, res = pts[first], res[first]
    # degenerate points converge only linearly, so their copies spread wider
    tree = cKDTree(pts, boxsize=TWO_PI)
    pairs = tree.query_pairs(opts.cluster_tol, output_type="ndarray")
    parent = np.arange(len(pts))

    def root(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, b in pairs:
        ra, rb = root(a), root(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    best: dict[int, int] = {}
    for i in range(len(pts)):
        r = root(i)
        if r not in best or res[i] < res[best[r]]:
            best[r] = i
    out = pts[sorted(best.values())]
    order = np.lexsort((out[:, 2], out[:, 1], out[:, 0]))
    return out[order]


def find_critical_points(f: DispersionRelation, E: float, direction: RationalDirection,
                         opts: TraceOptions = DEFAULT_OPTIONS) -> list[CriticalPoint]:
    """All points of {f = E} where grad f is parallel to the direction, in the fundamental domain."""
    grids = [opts.seed_grid, opts.seed_grid_check, 2 * opts.seed_grid_check]
    prev = _newton_from_grid(f, E, direction, grids[0], opts)
    for n in grids[1:]:
        cur = _newton_from_grid(f, E, direction, n, opts)
        if len(cur) == len(prev):
            break
        prev = cur
    else:
        raise SeedExhaustion(f"critical point counts disagree across seed grids {grids}")
    out = []
    u = direction.unit
    period = direction.height_period
    for x in prev:
        kind, mu, det = classify_critical(f, direction, x, opts)
        out.append(CriticalPoint(
            point=wrap_point(x),
            mu=mu,
            kind=kind,
            height=float(np.mod(u @ x, period)),
            phase=_phase(direction, x),
            det=det,
        ))
    return out


def group_levels(criticals: Sequence[CriticalPoint], direction: RationalDirection,
                 opts: TraceOptions = DEFAULT_OPTIONS) -> list[list[int]]:
    """Indices of critical points sharing one critical level, sorted by phase."""
    if not criticals:
        return []
    tol = opts.tol_h * float(np.linalg.norm(direction.hv))
    order = sorted(range(len(criticals)), key=lambda i: criticals[i].phase)
    groups = [[order[0]]]
    for i in order[1:]:
        if criticals[i].phase - criticals[groups[-1][-1]].phase <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) > 1:
        wrap = criticals[groups[0][0]].phase + TWO_PI - criticals[groups[-1][-1]].phase
        if wrap <= tol:
            groups[0] = groups.pop() + groups[0]
    return groups


# ---------------------------------------------------------------------------
# orbits

def _trace(f, E, direction, x0, sgn, opts, max_len, cap=None, min_before_close=1e-3):
    cap = np.zeros((0, 3)) if cap is None else np.ascontiguousarray(cap, dtype=np.float64)
    return kn.trace_level(
        f.K, f.A, f.B, float(E), direction.unit, np.asarray(x0, dtype=np.float64), float(sgn),
        opts.ds_max, opts.rtol, float(max_len), cap, opts.capture_radius, opts.tol_close,
        min_before_close,
    )


def trace_level_orbit(f: DispersionRelation, E: float, direction: RationalDirection, x0,
                      opts: TraceOptions = DEFAULT_OPTIONS, sign: float = 1.0,
                      critical: Sequence[CriticalPoint] = ()) -> Orbit:
    """Follow the section curve through ``x0`` until it closes up in the torus."""
    x0 = np.asarray(x0, dtype=np.float64)
    if abs(f(x0) - E) > 1e-6:
        raise ValueError("start point is not on the level surface")
    for c in critical:
        d = x0 - c.x
        d -= TWO_PI * np.rint(d / TWO_PI)
        if np.linalg.norm(d) < opts.saddle_exclusion:
            raise ValueError("start point lies inside the saddle exclusion radius")
    status, samples, _, shift, length, max_f, max_p = _trace(
        f, E, direction, x0, sign, opts, opts.max_len(direction.h))
    if status == kn.PROJFAIL or status == kn.STUCK:
        raise ProjectionFailure(f"projection failed after arc length {length:.3g}")
    if status != kn.CLOSED:
        raise MaxArcLength(f"orbit did not close within arc length {length:.3g}")
    disp = samples[-1] - samples[0]
    winding = tuple(int(c) for c in shift)
    residual = float(np.linalg.norm(disp - TWO_PI * shift))
    return Orbit(
        samples=samples,
        winding=winding,
        level=float(direction.hv @ samples[0]),
        closure_residual=residual,
        arc_length=float(length),
        max_f_residual=float(max_f),
        max_plane_drift=float(max_p),
    )


def _distinct_phases(phases: Sequence[float], tol: float = 1e-9) -> list[float]:
    """Sorted phases in [0, 2pi) with near-coincident values (also across 0) merged."""
    ph = sorted(float(np.mod(p, TWO_PI)) for p in phases)
    out: list[float] = []
    for p in ph:
        if not out or p - out[-1] > tol:
            out.append(p)
    if len(out) > 1 and out[0] + TWO_PI - out[-1] <= tol:
        out.pop()
    return out


def _level_gaps(phases: Sequence[float]):
    """(start, width) of each gap between consecutive critical phases on the circle."""
    ph = _distinct_phases(phases)
    if not ph:
        return [(0.0, TWO_PI)]
    gaps = []
    for i, a in enumerate(ph):
        b = ph[i + 1] if i + 1 < len(ph) else ph[0] + TWO_PI
        gaps.append((a, b - a))
    return gaps


def sample_regular_orbits(f: DispersionRelation, E: float, direction: RationalDirection,
                          critical_phases: Sequence[float],
                          opts: TraceOptions = DEFAULT_OPTIONS) -> list[Orbit]:
    """Trace orbits on a few regular levels inside every gap between critical levels.

    Levels are given as phases ``h.x mod 2pi``.  Seeds come from roots of
    f - E along closed scanlines of the section torus.
    """
    hv = direction.hv
    w1, w2 = orthogonal_lattice(direction.h)
    w1 = np.array(w1, dtype=float)
    w2 = np.array(w2, dtype=float)
    levels = []
    L = opts.levels_per_gap
    for start, width in _level_gaps(critical_phases):
        for j in range(L):
            levels.append(start + (j + 1) * width / (L + 1))
    nsamp = max(64, int(math.ceil(TWO_PI * np.linalg.norm(w1) / 0.02)))
    nlines = max(2, opts.seeds_per_level)
    orbits: list[Orbit] = []
    for level in levels:
        base = level * hv / (hv @ hv)
        seeds = []
        for j in range(nlines):
            b = base + TWO_PI * ((j + 0.5) / nlines) * w2
            for t in kn.line_roots(f.K, f.A, f.B, float(E), b, TWO_PI * w1, nsamp):
                seeds.append(b + t * TWO_PI * w1)
        if not seeds:
            continue
        if len(seeds) > opts.seeds_per_level:
            idx = np.linspace(0, len(seeds) - 1, opts.seeds_per_level).round().astype(int)
            seeds = [seeds[i] for i in idx]
        traced: list[Orbit] = []
        for s in seeds:
            if any(kn.polyline_distance(o.samples, s) < 1e-4 for o in traced):
                continue
            traced.append(trace_level_orbit(f, E, direction, s, opts))
        orbits.extend(traced)
    return orbits


# ---------------------------------------------------------------------------
# separatrix graphs

def _circle_roots(fun, nang=720):
    th = np.linspace(0.0, TWO_PI, nang + 1)
    vals = np.array([fun(t) for t in th])
    roots = []
    for i in range(nang):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(th[i])
        elif (a < 0) != (b < 0):
            roots.append(brentq(fun, th[i], th[i + 1], xtol=1e-14))
    return roots


def level_branches(f: DispersionRelation, E: float, direction: RationalDirection, x,
                   eps: float) -> list[np.ndarray]:
    """Points where the critical section curve through ``x`` crosses a small circle around it."""
    p1, p2 = direction.plane_basis()
    x = np.asarray(x, dtype=float)

    def fun(t):
        return f(x + eps * (math.cos(t) * p1 + math.sin(t) * p2)) - E

    pts = []
    for t in _circle_roots(fun):
        q = x + eps * (math.cos(t) * p1 + math.sin(t) * p2)
        pts.append(q)
    return pts


def ascending_starts(f: DispersionRelation, E: float, direction: RationalDirection, x,
                     eps: float) -> list[np.ndarray]:
    """Surface points next to a critical point in the middle of each ascending sector."""
    p1, p2 = direction.plane_basis()
    hv = direction.hv
    x = np.asarray(x, dtype=float)
    nang = 360
    th = np.arange(nang) * TWO_PI / nang
    pts = np.empty((nang, 3))
    rise = np.empty(nang)
    for i, t in enumerate(th):
        q = x + eps * (math.cos(t) * p1 + math.sin(t) * p2)
        if kn.project_surface(f.K, f.A, f.B, float(E), q) < 0:
            rise[i] = -np.inf
        else:
            rise[i] = hv @ (q - x)
        pts[i] = q
    out = []
    for i in range(nang):
        a, b, c = rise[i - 1], rise[i], rise[(i + 1) % nang]
        if b > 0 and b >= a and b > c:
            out.append(pts[i])
    return out


def _union_find_cycles(n, edges):
    """Cycle classes (displacement / 2pi) of a graph with lifted edge displacements."""
    parent = list(range(n))
    pot = [np.zeros(3) for _ in range(n)]  # position of vertex relative to its root

    def find(i):
        path = []
        while parent[i] != i:
            path.append(i)
            i = parent[i]
        root = i
        # compress, accumulating potentials toward the root
        for v in reversed(path):
            p = parent[v]
            if p != root:
                pot[v] = pot[v] + pot[p]
            parent[v] = root
        return root

    classes = []
    for a, b, disp in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            gap = pot[a] + disp - pot[b]
            classes.append(winding_from_lift(gap, tol=1e-3))
        else:
            # attach rb under ra so that pot[b] = pot[a] + disp
            parent[rb] = ra
            pot[rb] = pot[a] + disp - pot[b]
    return classes, [find(i) for i in range(n)]


def trace_separatrix_graph(f: DispersionRelation, E: float, direction: RationalDirection,
                           criticals: Sequence[CriticalPoint],
                           opts: TraceOptions = DEFAULT_OPTIONS) -> list[SeparatrixGraph]:
    """Separatrix graphs of every critical level that carries a saddle or degenerate point."""
    max_len = opts.max_len(direction.h)
    graphs: list[SeparatrixGraph] = []
    for group in group_levels(criticals, direction, opts):
        verts = [i for i in group if criticals[i].kind != EXTREMUM]
        if not verts:
            continue
        cap = np.array([criticals[i].x for i in verts])
        branches = {i: level_branches(f, E, direction, criticals[i].x, opts.eps_branch) for i in verts}
        for i in verts:
            nb = len(branches[i])
            if nb < 4 or nb % 2:
                raise DegenerateBranching(f"critical point {i} has {nb} level branches")
        used: set[tuple[int, int]] = set()
        edges: list[SeparatrixEdge] = []
        for i in verts:
            p = criticals[i].x
            for a, q in enumerate(branches[i]):
                if (i, a) in used:
                    continue
                used.add((i, a))
                v = characteristic_velocity(f, direction, q)
                sgn = 1.0 if v @ (q - p) > 0 else -1.0
                status, samples, jloc, shift, length, _, _ = _trace(
                    f, E, direction, q, sgn, opts, max_len, cap=cap, min_before_close=1e300)
                if status != kn.CAPTURED:
                    raise DanglingSeparatrix(
                        f"branch {a} of critical point {i} not captured (status {status}, length {length:.3g})")
                j = verts[jloc]
                end = criticals[j].x + TWO_PI * shift
                arrive = samples[-1] - end
                bj = branches[j]
                if bj:
                    dirs = np.array([(b - criticals[j].x) for b in bj])
                    cosines = dirs @ arrive / (np.linalg.norm(dirs, axis=1) * max(np.linalg.norm(arrive), 1e-300))
                    b_idx = int(np.argmax(cosines))
                    used.add((j, b_idx))
                else:
                    b_idx = -1
                pts = np.vstack([p[None, :], samples, end[None, :]])
                edges.append(SeparatrixEdge(i, j, end - p, pts, a, b_idx))
        # split into connected components
        local = {v: k for k, v in enumerate(verts)}
        _, roots = _union_find_cycles(len(verts), [(local[e.source], local[e.target], e.displacement)
                                                   for e in edges])
        for r in sorted(set(roots)):
            comp = [verts[k] for k in range(len(verts)) if roots[k] == r]
            comp_edges = [e for e in edges if local[e.source] in [local[c] for c in comp]]
            cl = {v: k for k, v in enumerate(comp)}
            classes, _ = _union_find_cycles(len(comp), [(cl[e.source], cl[e.target], e.displacement)
                                                        for e in comp_edges])
            graphs.append(SeparatrixGraph(
                vertices=comp,
                edges=comp_edges,
                cycle_classes=classes,
                phase=criticals[comp[0]].phase,
            ))
    return graphs


# ---------------------------------------------------------------------------
# transverse structure

class CylinderProbe:
    """Windings of the orbit cylinders just above or below points of critical levels.

    A point on a critical level is pushed along the height gradient to the
    nearest sampled regular level of the adjacent gap, and the orbit through
    the landing point is identified with an already traced one when that is
    unambiguous, or traced otherwise.
    """

    def __init__(self, f: DispersionRelation, E: float, direction: RationalDirection,
                 criticals: Sequence[CriticalPoint], opts: TraceOptions = DEFAULT_OPTIONS,
                 orbits: Sequence[Orbit] = ()):
        self.f = f
        self.E = float(E)
        self.direction = direction
        self.opts = opts
        self.hv = direction.hv
        self.phases = _distinct_phases([c.phase for c in criticals])
        self.orbits = list(orbits)
        self.max_len = opts.max_len(direction.h)

    def _neighbours(self, phi: float, up: bool) -> tuple[float, float]:
        """Lifted critical phases (below, above) bracketing the gap next to ``phi``."""
        base = math.floor(phi / TWO_PI) * TWO_PI
        lifted = [base + k * TWO_PI + p for k in (-1, 0, 1, 2) for p in self.phases]
        tol = 1e-8
        if up:
            hi = min(c for c in lifted if c > phi + tol)
            lo = max(c for c in lifted if c <= phi + tol)
        else:
            lo = max(c for c in lifted if c < phi - tol)
            hi = min(c for c in lifted if c >= phi - tol)
        return lo, hi

    def probe_level(self, phi: float, up: bool) -> float:
        if not self.phases:
            return phi + (0.5 if up else -0.5)
        lo, hi = self._neighbours(phi, up)
        frac = 1.0 / (self.opts.levels_per_gap + 1)
        return lo + frac * (hi - lo) if up else hi - frac * (hi - lo)

    def _flow(self, x, level: float, up: bool):
        hv = self.hv if up else -self.hv
        target = level if up else -level
        f = self.f
        status, y, _ = kn.flow_to_height(f.K, f.A, f.B, self.E, hv, np.asarray(x, dtype=float), target,
                                         self.opts.ds_max, self.opts.rtol, self.max_len)
        if status != kn.CLOSED:
            raise ProjectionFailure(f"height flow failed (status {status})")
        return y

    def orbit_winding(self, x, level: float) -> tuple[int, int, int]:
        """Winding of the orbit through ``x``, reusing a traced orbit when the trace runs into it."""
        cands = []
        for o in self.orbits:
            d = o.level - level
            if abs(d - TWO_PI * round(d / TWO_PI)) > 1e-7:
                continue
            if kn.polyline_distance(o.samples, x) < 5e-2:
                cands.append(o)
        if cands:
            budget = 1.1 * max(o.arc_length for o in cands) + 1.0
            cap = np.array([o.samples[0] for o in cands])
            status, _, j, _, _, _, _ = _trace(self.f, self.E, self.direction, x, 1.0, self.opts, budget,
                                              cap=cap, min_before_close=1e-3)
            if status == kn.CAPTURED:
                return cands[j].winding
        o = trace_level_orbit(self.f, self.E, self.direction, x, self.opts)
        self.orbits.append(o)
        return o.winding

    def winding(self, x, up: bool, base: float | None = None):
        """(winding, landing point) of the cylinder entered from ``x`` going up or down."""
        phi = float(self.hv @ x) if base is None else base
        level = self.probe_level(phi, up)
        y = self._flow(x, level, up)
        return self.orbit_winding(y, level), y


def open_edges(graphs: Sequence[SeparatrixGraph], probe: CylinderProbe) -> list[list[bool]]:
    """For each graph edge: does an open-orbit cylinder lie directly above or below it?"""
    f = probe.f
    out = []
    for g in graphs:
        flags = []
        for e in g.edges:
            k = len(e.samples) // 2
            x = e.samples[k].copy()
            if len(e.samples) < 3:
                x = 0.5 * (e.samples[0] + e.samples[-1])
                if kn.project_level(f.K, f.A, f.B, probe.E, probe.direction.unit,
                                    float(probe.direction.unit @ e.samples[0]), x) < 0:
                    raise ProjectionFailure("cannot place a point on a short separatrix edge")
            phi = float(probe.hv @ x)
            flags.append(any(any(probe.winding(x, up, base=phi)[0]) for up in (True, False)))
        out.append(flags)
    return out


def trace_transverse_links(f: DispersionRelation, E: float, direction: RationalDirection,
                           criticals: Sequence[CriticalPoint], graphs: Sequence[SeparatrixGraph],
                           opts: TraceOptions = DEFAULT_OPTIONS,
                           probe: CylinderProbe | None = None) -> list[TransverseLink]:
    """Climb from each critical point through every adjacent cylinder of open orbits.

    The ascending gradient flow is followed across the cylinder to the
    critical level bounding it from above, then along that level to one of
    its critical points.  The lifted displacement of the whole path is
    recorded; closed chains of such links and carrier edges hold the homology
    that level curves alone cannot see.
    """
    if not graphs:
        return []
    if probe is None:
        probe = CylinderProbe(f, E, direction, criticals, opts)
    hv = direction.hv
    max_len = opts.max_len(direction.h)
    verts = sorted({v for g in graphs for v in g.vertices})
    by_phase: dict[float, list[SeparatrixGraph]] = {}
    for g in graphs:
        by_phase.setdefault(g.phase, []).append(g)
    graph_phases = sorted(by_phase)
    edge_len = {id(g): max((np.sum(np.linalg.norm(np.diff(e.samples, axis=0), axis=1)) for e in g.edges),
                           default=0.0) for g in graphs}

    def graphs_at(c):
        ph = c - math.floor(c / TWO_PI) * TWO_PI
        out = []
        for p in graph_phases:
            d = abs(ph - p)
            if min(d, TWO_PI - d) < 1e-7:
                out.extend(by_phase[p])
        return out

    links: list[TransverseLink] = []
    for s in verts:
        ps = criticals[s].x
        phi_s = float(hv @ ps)
        for q in ascending_starts(f, E, direction, ps, opts.eps_branch):
            w, x = probe.winding(q, True, base=phi_s)
            if w == (0, 0, 0):
                continue
            travelled = 0.0
            target = None
            lo, c = probe._neighbours(float(hv @ x), True)
            # climb until the flow lands on a separatrix graph
            while target is None and c - phi_s < 64 * TWO_PI:
                status, x, ln = kn.flow_to_height(f.K, f.A, f.B, float(E), hv, x, c, opts.ds_max,
                                                  opts.rtol, max_len)
                travelled += ln
                if travelled > max_len:
                    break
                if status == kn.STUCK:
                    # the flow ran into a critical point
                    target = _nearest_vertex(criticals, verts, x, 10 * opts.eps_branch)
                    if target is None:
                        raise ProjectionFailure("ascending flow stalled away from critical points")
                    break
                if status != kn.CLOSED:
                    raise ProjectionFailure(f"ascending flow failed (status {status})")
                for g in graphs_at(c):
                    if min(kn.polyline_distance(e.samples, x) for e in g.edges) > opts.land_tol:
                        continue
                    cap = np.array([criticals[v].x for v in g.vertices])
                    budget = 1.2 * edge_len[id(g)] + 1.0
                    st, _, jloc, shift, _, _, _ = _trace(f, E, direction, x, 1.0, opts, budget, cap=cap,
                                                         min_before_close=1e-3)
                    if st == kn.CAPTURED:
                        target = (g.vertices[jloc], shift)
                        break
                _, c = probe._neighbours(c, True)
            if target is None:
                raise DanglingSeparatrix(f"ascending path from critical point {s} never reached a critical level")
            j, shift = target
            end = criticals[j].x + TWO_PI * np.asarray(shift)
            links.append(TransverseLink(s, j, end - ps, w))
    return links


def _nearest_vertex(criticals, verts, x, radius):
    best = None
    for v in verts:
        d = x - criticals[v].x
        shift = np.rint(d / TWO_PI)
        r = np.linalg.norm(d - TWO_PI * shift)
        if r < radius and (best is None or r < best[2]):
            best = (v, shift, r)
    return None if best is None else (best[0], best[1])


def carrier_cycles(graphs: Sequence[SeparatrixGraph], links: Sequence[TransverseLink],
                   edge_mask: Sequence[Sequence[bool]] | None = None) -> list[tuple[int, int, int]]:
    """Cycle classes of the graph formed by (selected) separatrix edges together with the transverse links."""
    if edge_mask is None:
        edge_mask = [[True] * len(g.edges) for g in graphs]
    chosen = [e for g, mask in zip(graphs, edge_mask) for e, keep in zip(g.edges, mask) if keep]
    verts = sorted({e.source for e in chosen} | {e.target for e in chosen}
                   | {l.source for l in links} | {l.target for l in links})
    idx = {v: k for k, v in enumerate(verts)}
    edges = [(idx[e.source], idx[e.target], e.displacement) for e in chosen]
    edges += [(idx[l.source], idx[l.target], l.displacement) for l in links]
    classes, _ = _union_find_cycles(len(verts), edges)
    return classes
