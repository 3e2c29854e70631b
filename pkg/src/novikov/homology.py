"""Integer homology bookkeeping: windings, cycle lattices and Miller-index labels."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGenerator, NonIntegral, ZeroVector

TWO_PI = 2.0 * math.pi

Vec3 = tuple[int, int, int]

UNRESOLVED_REASONS = ("RankOne", "RankThree", "DanglingSeparatrix", "SolverFailure", "Degenerate")


@dataclass(frozen=True)
class ZoneLabel:
    kind: str  # "zone" | "null" | "unresolved"
    miller: Vec3 | None = None
    reason: str | None = None

    @classmethod
    def zone(cls, l) -> "ZoneLabel":
        l = tuple(int(c) for c in l)
        if l == (0, 0, 0) or math.gcd(*l) != 1:
            raise ValueError(f"zone label must be primitive and nonzero, got {l}")
        return cls("zone", l)

    @classmethod
    def null(cls) -> "ZoneLabel":
        return cls("null")

    @classmethod
    def unresolved(cls, reason: str) -> "ZoneLabel":
        if reason not in UNRESOLVED_REASONS:
            raise ValueError(f"unknown reason {reason!r}")
        return cls("unresolved", reason=reason)

    @property
    def is_zone(self) -> bool:
        return self.kind == "zone"

    @property
    def is_null(self) -> bool:
        return self.kind == "null"

    @property
    def is_unresolved(self) -> bool:
        return self.kind == "unresolved"

    def to_json(self):
        if self.kind == "zone":
            return {"zone": list(self.miller)}
        if self.kind == "null":
            return "null"
        return {"unresolved": self.reason}

    @classmethod
    def from_json(cls, obj) -> "ZoneLabel":
        if obj == "null":
            return cls.null()
        if isinstance(obj, dict) and len(obj) == 1:
            if "zone" in obj:
                return cls.zone(obj["zone"])
            if "unresolved" in obj:
                return cls.unresolved(obj["unresolved"])
        raise ValueError(f"not a label: {obj!r}")

    def __str__(self):
        if self.kind == "zone":
            return ",".join(str(c) for c in self.miller)
        if self.kind == "null":
            return "null"
        return f"unresolved:{self.reason}"


def winding_from_lift(displacement, tol: float = 1e-6) -> Vec3:
    """Homology class in H1(T^3) = Z^3 of a closed lifted path with the given displacement."""
    q = np.asarray(displacement, dtype=np.float64) / TWO_PI
    r = np.rint(q)
    dev = np.abs(q - r)
    if np.any(dev > tol):
        raise NonIntegral(f"displacement/2pi = {q.tolist()} is not integral (max deviation {dev.max():.3g})")
    return tuple(int(c) for c in r)


def primitive(v) -> Vec3:
    v = tuple(int(c) for c in v)
    g = math.gcd(*v)
    if g == 0:
        raise ZeroVector("primitive() of the zero vector")
    return tuple(c // g for c in v)


def cross(a, b) -> Vec3:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def dot(a, b) -> int:
    return sum(int(x) * int(y) for x, y in zip(a, b))


def hermite_normal_form(rows: Iterable[Sequence[int]]) -> list[Vec3]:
    """Row-style Hermite normal form of the lattice spanned by ``rows`` (zero rows dropped)."""
    M = [list(int(c) for c in r) for r in rows if any(r)]
    basis: list[list[int]] = []
    ncols = 3
    r0 = 0
    for col in range(ncols):
        # gcd-combine column entries from row r0 downwards
        piv = None
        for i in range(r0, len(M)):
            if M[i][col] != 0:
                piv = i
                break
        if piv is None:
            continue
        M[r0], M[piv] = M[piv], M[r0]
        for i in range(r0 + 1, len(M)):
            a, b = M[r0][col], M[i][col]
            if b == 0:
                continue
            g, x, y = _xgcd(a, b)
            # unimodular 2x2: [x y; -b/g a/g]
            top = [x * p + y * q for p, q in zip(M[r0], M[i])]
            bot = [(-b // g) * p + (a // g) * q for p, q in zip(M[r0], M[i])]
            M[r0], M[i] = top, bot
        if M[r0][col] < 0:
            M[r0] = [-c for c in M[r0]]
        r0 += 1
        if r0 == len(M):
            break
    basis = [row for row in M[:r0] if any(row)]
    # reduce entries above pivots
    pivots = [next(j for j in range(ncols) if row[j] != 0) for row in basis]
    for i, (row, pc) in enumerate(zip(basis, pivots)):
        for k in range(i):
            q = basis[k][pc] // row[pc]
            if q:
                basis[k] = [a - q * b for a, b in zip(basis[k], row)]
    return [tuple(r) for r in basis]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def orthogonal_lattice(h) -> tuple[Vec3, Vec3]:
    """A Lagrange-reduced basis of {v in Z^3 : v.h = 0} for nonzero ``h``."""
    h = tuple(int(c) for c in h)
    if h == (0, 0, 0):
        raise ZeroVector("orthogonal_lattice of zero")
    # kernel via unimodular column reduction of the 1x3 row h
    U = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]  # columns are images of e_j
    row = list(h)
    for j in (1, 2):
        a, b = row[0], row[j]
        if b == 0:
            continue
        g, x, y = _xgcd(a, b)
        ca = [U[i][0] for i in range(3)]
        cb = [U[i][j] for i in range(3)]
        for i in range(3):
            U[i][0] = x * ca[i] + y * cb[i]
            U[i][j] = (-b // g) * ca[i] + (a // g) * cb[i]
        row[0], row[j] = g, 0
    if row[0] == 0:
        # h had a zero first entry and nothing else to combine: impossible for h != 0
        raise ZeroVector("degenerate kernel computation")
    a = tuple(U[i][1] for i in range(3))
    b = tuple(U[i][2] for i in range(3))
    return _lagrange_reduce(a, b)


def _lagrange_reduce(a, b):
    a, b = list(a), list(b)
    if dot(a, a) > dot(b, b):
        a, b = b, a
    while True:
        q = round(dot(a, b) / dot(a, a))
        b = [x - q * y for x, y in zip(b, a)]
        if dot(b, b) >= dot(a, a):
            break
        a, b = b, a
    return tuple(a), tuple(b)


def lattice_rank(rows) -> int:
    M = np.array([list(r) for r in rows if any(r)], dtype=float)
    if M.size == 0:
        return 0
    return int(np.linalg.matrix_rank(M))


@dataclass(frozen=True)
class CycleLattice:
    generators: tuple[Vec3, ...]
    rank: int
    basis: tuple[Vec3, ...]
    transverse: bool = False  # some generator leaves the plane orthogonal to h


def cycle_lattice(graphs=(), orbits=(), h=(0, 0, 1), transverse=()) -> CycleLattice:
    """Sublattice of Z^3 generated by separatrix-graph cycles, orbit windings and transverse cycles.

    Generators from ``graphs`` and ``orbits`` must be orthogonal to ``h``; the
    ``transverse`` classes come from closed paths that climb across regions of
    open orbits and are exempt from that check.
    """
    h = tuple(int(c) for c in h)
    gens: list[Vec3] = []
    for g in graphs:
        gens.extend(tuple(int(c) for c in w) for w in g.cycle_classes)
    for o in orbits:
        gens.append(tuple(int(c) for c in o.winding))
    for w in gens:
        if dot(w, h) != 0:
            raise InvalidGenerator(f"generator {w} is not orthogonal to h = {h}")
    trans = [tuple(int(c) for c in w) for w in transverse]
    allg = gens + trans
    basis = hermite_normal_form(allg)
    return CycleLattice(
        generators=tuple(allg),
        rank=len(basis),
        basis=tuple(basis),
        transverse=any(dot(w, h) != 0 for w in trans),
    )


def miller_from_lattice(L: CycleLattice, h=None) -> ZoneLabel:
    if L.rank == 0:
        return ZoneLabel.null()
    if L.rank == 1:
        return ZoneLabel.unresolved("RankOne")
    if L.rank == 3:
        return ZoneLabel.unresolved("RankThree")
    b1, b2 = L.basis
    return ZoneLabel.zone(primitive(cross(b1, b2)))


def canonical_label(l, symmetric: bool = True) -> Vec3:
    l = tuple(int(c) for c in l)
    if l == (0, 0, 0):
        raise ZeroVector("canonical_label of zero")
    if symmetric:
        return tuple(sorted(abs(c) for c in l))
    last = next(c for c in reversed(l) if c != 0)
    return l if last > 0 else tuple(-c for c in l)


def signed_permutations():
    """The 48 signed permutation matrices as (perm, signs) pairs."""
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            yield perm, signs


def apply_signed_permutation(v, perm, signs) -> Vec3:
    return tuple(signs[i] * v[perm[i]] for i in range(3))
