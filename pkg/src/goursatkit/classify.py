"""First/second-kind conditions in torsion and PDE form, plus sampling classifier.

Every condition is reported both raw and relative; the relative form divides
by the largest monomial entering the condition, floored at 1e-12, so verdicts
are invariant under rescaling the defining function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .web import TorsionTensor, WebFunction, torsion

SCALE_FLOOR = 1e-12
DEGENERACY_TOL = 1e-10
DEFAULT_TOL = 1e-7


class TooFewRegularPoints(RuntimeError):
    def __init__(self, found: int, wanted: int, attempts: int):
        super().__init__(
            f"only {found}/{wanted} regular sample points after {attempts} draws"
        )
        self.found = found
        self.wanted = wanted


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling box, one (lo, hi) pair per coordinate."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid box interval ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls(((float(lo), float(hi)),) * n)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lows = np.array([b[0] for b in self.bounds])
        highs = np.array([b[1] for b in self.bounds])
        return rng.uniform(lows, highs, size=(count, self.dim))


def sample_regular_points(web: WebFunction, box: Box, count: int, seed: int,
                          oversample: int = 10) -> np.ndarray:
    """Deterministic regular-point sample; draws up to oversample*count points."""
    if box.dim != web.arity:
        raise ValueError("box dimension must match the web arity")
    rng = np.random.default_rng(seed)
    points = []
    attempts = 0
    while len(points) < count and attempts < oversample * count:
        batch = box.sample(rng, count)
        for p in batch:
            attempts += 1
            if attempts > oversample * count:
                break
            if web.is_regular(p):
                points.append(p)
                if len(points) == count:
                    break
    if len(points) < count:
        raise TooFewRegularPoints(len(points), count, attempts)
    return np.array(points)


def _rel(value: float, monomials: Sequence[float]) -> float:
    scale = max([abs(m) for m in monomials] + [SCALE_FLOOR])
    return abs(value) / scale


def first_kind_residual(t: TorsionTensor) -> tuple[float, float]:
    """a13*a24 - a14*a23, raw and relative."""
    x = t.entry(1, 3) * t.entry(2, 4)
    y = t.entry(1, 4) * t.entry(2, 3)
    return x - y, _rel(x - y, (x, y))


def first_kind_pde_residual(web: WebFunction, p: Sequence[float]) -> tuple[float, float]:
    """Cleared determinant F13*F24 - F14*F23, raw and relative.

    Equals F1*F2*F3*F4 times the torsion-form residual, so the two forms
    agree after normalization.
    """
    jet = web.jet(p, 2)
    x = jet.deriv((1, 3)) * jet.deriv((2, 4))
    y = jet.deriv((1, 4)) * jet.deriv((2, 3))
    return x - y, _rel(x - y, (x, y))


@dataclass(frozen=True)
class SecondKindResiduals:
    """The four equivalent second-kind conditions evaluated on one tensor.

    det24 is the 3x3 determinant with a row of ones over the (1,2)x(3,4,5)
    torsion block; sum25 is the cyclic sum of its three 2x2 column minors
    (identically equal to det24); expr26 is the six-product expansion
    (identically 2*det24); cross27 clears denominators in the difference-ratio
    form for the index choice (p,q,a,b,c) = (1,2,3,4,5).
    """

    det24: float
    sum25: float
    expr26: float
    cross27: float
    scale: float

    @property
    def det24_rel(self) -> float:
        return abs(self.det24) / self.scale

    @property
    def cross27_rel(self) -> float:
        return abs(self.cross27) / self.scale


def torsion_minors(t: TorsionTensor) -> tuple[float, float, float]:
    """The cyclic 2x2 minors (A, B, C) of the (1,2)x(3,4,5) torsion block.

    A + B + C equals the row-of-ones determinant, hence vanishes exactly on
    second-kind webs.
    """
    a13, a14, a15 = (t.entry(1, q) for q in (3, 4, 5))
    a23, a24, a25 = (t.entry(2, q) for q in (3, 4, 5))
    return (a13 * a24 - a14 * a23,
            a14 * a25 - a15 * a24,
            a15 * a23 - a13 * a25)


def second_kind_residuals(t: TorsionTensor) -> SecondKindResiduals:
    if t.n < 5:
        raise ValueError("second-kind conditions need arity n >= 5")
    a13, a14, a15 = (t.entry(1, q) for q in (3, 4, 5))
    a23, a24, a25 = (t.entry(2, q) for q in (3, 4, 5))
    det24 = float(np.linalg.det(np.array(
        [[1.0, 1.0, 1.0], [a13, a14, a15], [a23, a24, a25]])))
    A, B, C = torsion_minors(t)
    sum25 = A + B + C
    expr26 = (a13 * (a24 - a25) + a14 * (a25 - a23) + a15 * (a23 - a24)
              + a23 * (a15 - a14) + a24 * (a13 - a15) + a25 * (a14 - a13))
    cross27 = (a13 - a14) * (a23 - a25) - (a23 - a24) * (a13 - a15)
    scale = max(abs(a13 * a24), abs(a14 * a23), abs(a14 * a25),
                abs(a15 * a24), abs(a15 * a23), abs(a13 * a25), SCALE_FLOOR)
    return SecondKindResiduals(det24, sum25, expr26, cross27, scale)


def second_kind_pde_residual(web: WebFunction, p: Sequence[float]) -> tuple[float, float]:
    """det [[F3,F4,F5],[F13,F14,F15],[F23,F24,F25]], raw and relative."""
    if web.arity < 5:
        raise ValueError("second-kind PDE needs arity n >= 5")
    jet = web.jet(p, 2)
    g = jet.gradient()
    rows = np.array([
        [g[2], g[3], g[4]],
        [jet.deriv((1, 3)), jet.deriv((1, 4)), jet.deriv((1, 5))],
        [jet.deriv((2, 3)), jet.deriv((2, 4)), jet.deriv((2, 5))],
    ])
    det = float(np.linalg.det(rows))
    # scale: largest expansion monomial of the 3x3 determinant
    monos = []
    for c0, c1, c2 in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
        monos.append(rows[0, c0] * rows[1, c1] * rows[2, c2])
    return det, _rel(det, monos)


@dataclass
class ClassificationReport:
    n: int
    tol: float
    seed: int
    points: np.ndarray = field(repr=False)
    first_rel: np.ndarray = field(repr=False)       # torsion form, per point
    first_pde_rel: np.ndarray = field(repr=False)
    second_rel: np.ndarray | None = field(repr=False, default=None)
    second_pde_rel: np.ndarray | None = field(repr=False, default=None)
    degenerate_rows: tuple[bool, bool] = (False, False)

    @property
    def first_kind(self) -> bool:
        return bool(max(self.first_rel.max(), self.first_pde_rel.max()) < self.tol)

    @property
    def second_kind(self) -> bool | None:
        if self.second_rel is None:
            return None
        return bool(max(self.second_rel.max(), self.second_pde_rel.max()) < self.tol)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "tol": self.tol,
            "seed": self.seed,
            "points": self.points.tolist(),
            "first_kind": self.first_kind,
            "first_kind_residuals": {
                "torsion_form_rel": self.first_rel.tolist(),
                "pde_form_rel": self.first_pde_rel.tolist(),
            },
            "degenerate_rows": list(self.degenerate_rows),
        }
        if self.second_rel is not None:
            out["second_kind"] = self.second_kind
            out["second_kind_residuals"] = {
                "det_form_rel": self.second_rel.tolist(),
                "pde_form_rel": self.second_pde_rel.tolist(),
            }
        else:
            out["second_kind"] = None
        return out


def classify(web: WebFunction, box: Box, count: int = 32,
             tol: float = DEFAULT_TOL, seed: int = 0) -> ClassificationReport:
    """Sample the box and test the kind conditions in all equivalent forms.

    Deterministic under a fixed seed; points failing regularity are resampled
    (up to ten times the requested count).
    """
    points = sample_regular_points(web, box, count, seed)
    first = np.empty(count)
    first_pde = np.empty(count)
    has_second = web.arity >= 5
    second = np.empty(count) if has_second else None
    second_pde = np.empty(count) if has_second else None
    row1_deg = row2_deg = True
    cols = (3, 4, 5) if has_second else (3, 4)
    for i, p in enumerate(points):
        t = torsion(web, p)
        _, first[i] = first_kind_residual(t)
        _, first_pde[i] = first_kind_pde_residual(web, p)
        row1_deg &= t.row_vanishes(1, cols)
        row2_deg &= t.row_vanishes(2, cols)
        if has_second:
            res = second_kind_residuals(t)
            second[i] = res.det24_rel
            _, second_pde[i] = second_kind_pde_residual(web, p)
    return ClassificationReport(
        n=web.arity, tol=tol, seed=seed, points=points,
        first_rel=first, first_pde_rel=first_pde,
        second_rel=second, second_pde_rel=second_pde,
        degenerate_rows=(row1_deg, row2_deg),
    )
