"""Trigonometric dispersion relations on the 3-torus (R/2piZ)^3."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import SurfaceFormatError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DispersionRelation:
    """f(x) = sum_k a_k cos(k.x) + b_k sin(k.x) with integer frequencies k."""

    terms: tuple[tuple[tuple[int, int, int], float, float], ...]
    name: str = "custom"
    K: np.ndarray = field(init=False, repr=False, compare=False)
    A: np.ndarray = field(init=False, repr=False, compare=False)
    B: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple((tuple(int(c) for c in k), float(a), float(b)) for k, a, b in self.terms)
        if not any(any(k) for k, _, _ in terms):
            raise ValueError("a dispersion relation needs a term with nonzero frequency")
        object.__setattr__(self, "terms", terms)
        K = np.array([k for k, _, _ in terms], dtype=np.float64).reshape(-1, 3)
        A = np.array([a for _, a, _ in terms], dtype=np.float64)
        B = np.array([b for _, _, b in terms], dtype=np.float64)
        for arr in (K, A, B):
            arr.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def arrays(self):
        return self.K, self.A, self.B

    def __call__(self, x) -> float:
        return _kernels.value(self.K, self.A, self.B, np.asarray(x, dtype=np.float64))

    def values(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return _kernels.values_many(self.K, self.A, self.B, X)

    def is_cubic_symmetric(self, samples: int = 64, seed: int = 0) -> bool:
        """True if f is invariant under all 48 signed coordinate permutations."""
        rng = np.random.default_rng(seed)
        X = rng.uniform(0.0, TWO_PI, size=(samples, 3))
        base = self.values(X)
        for perm in itertools.permutations(range(3)):
            for signs in itertools.product((1.0, -1.0), repeat=3):
                Y = X[:, perm] * np.array(signs)
                if not np.allclose(self.values(Y), base, atol=1e-12):
                    return False
        return True

    def to_text(self) -> str:
        lines = [f"# {self.name}"]
        for k, a, b in self.terms:
            ks = ",".join(str(c) for c in k)
            if a != 0.0:
                lines.append(f"cos {ks} {a!r}")
            if b != 0.0:
                lines.append(f"sin {ks} {b!r}")
        return "\n".join(lines) + "\n"


def simple_cubic() -> DispersionRelation:
    """cos x + cos y + cos z."""
    return DispersionRelation(
        terms=(((1, 0, 0), 1.0, 0.0), ((0, 1, 0), 1.0, 0.0), ((0, 0, 1), 1.0, 0.0)),
        name="simple-cubic",
    )


BUILTIN = {"simple-cubic": simple_cubic}


def parse_surface(text: str, name: str = "custom") -> DispersionRelation:
    """Parse the one-term-per-line format: ``cos k1,k2,k3 coeff`` / ``sin k1,k2,k3 coeff``."""
    coeffs: dict[tuple[int, int, int], list[float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("cos", "sin"):
            raise SurfaceFormatError(f"line {lineno}: expected 'cos|sin k1,k2,k3 coeff', got {raw!r}")
        try:
            k = tuple(int(c) for c in parts[1].split(","))
            coeff = float(parts[2])
        except ValueError as exc:
            raise SurfaceFormatError(f"line {lineno}: {exc}") from None
        if len(k) != 3:
            raise SurfaceFormatError(f"line {lineno}: frequency needs three integers")
        slot = coeffs.setdefault(k, [0.0, 0.0])
        slot[0 if parts[0] == "cos" else 1] += coeff
    if not coeffs:
        raise SurfaceFormatError("no terms found")
    try:
        return DispersionRelation(terms=tuple((k, a, b) for k, (a, b) in coeffs.items()), name=name)
    except ValueError as exc:
        raise SurfaceFormatError(str(exc)) from None


def load_surface(spec: str) -> DispersionRelation:
    """A built-in name or a path to a surface text file."""
    if spec in BUILTIN:
        return BUILTIN[spec]()
    path = Path(spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SurfaceFormatError(f"cannot read surface file {spec!r}: {exc.strerror}") from None
    return parse_surface(text, name=path.stem)


@dataclass(frozen=True)
class TorusPoint:
    position: np.ndarray
    lift_shift: np.ndarray

    @property
    def lifted(self) -> np.ndarray:
        return self.position + TWO_PI * self.lift_shift


@dataclass(frozen=True)
class Jet:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def evaluate_jet(f: DispersionRelation, x) -> Jet:
    v, g, H = _kernels.jet(f.K, f.A, f.B, np.asarray(x, dtype=np.float64))
    H = 0.5 * (H + H.T)
    return Jet(float(v), g, H)


def wrap_point(x) -> TorusPoint:
    """Reduce ``x`` into [0, 2pi)^3, remembering how many periods were removed."""
    x = np.asarray(x, dtype=np.float64)
    shift = np.floor(x / TWO_PI)
    pos = x - TWO_PI * shift
    # rounding can land exactly on 2pi
    over = pos >= TWO_PI
    pos[over] -= TWO_PI
    shift[over] += 1
    under = pos < 0.0
    pos[under] += TWO_PI
    shift[under] -= 1
    # a tiny negative x (x / 2pi underflows to -0) wraps up to exactly 2pi
    over = pos >= TWO_PI
    pos[over] = 0.0
    shift[over] += 1
    return TorusPoint(pos, shift.astype(np.int64))
