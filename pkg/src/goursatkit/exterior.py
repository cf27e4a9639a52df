"""Pfaffian systems in coordinates: ranks, kernels, Frobenius integrability.

Systems are lists of 1-form fields with jet-evaluable coefficients.  The
named constructors expand the web's torsion-weighted forms in coordinates
with common nonzero factors dropped (kernels and integrability verdicts are
unchanged; the normalized residual makes the thresholds scale-free):

    S10       F13 dx3 + F14 dx4                            + dx_s, s>=5
    S11       F23 dx3 + F24 dx4                            + dx_s, s>=5
    S12       F13 dx1 + F23 dx2                            + dx_s, s>=5
    S13       F14 dx1 + F24 dx2                            + dx_s, s>=5
    S10_11    union of the S10/S11 lead forms              + dx_s, s>=5
    THETA_RHO S10 lead + S12 lead                          + dx_s, s>=5
    DELTA2    F3 dx3+F4 dx4+F5 dx5; F13 dx3+F14 dx4+F15 dx5;
              F23 dx3+F24 dx4+F25 dx5; F1 dx1+F2 dx2       + dx_s, s>=6
    DELTA3    F1b dx1 + F2b dx2 + Fb*F3 dx3, b = 3, 4, 5   + dx_s, s>=6
    DELTA4    (F3 F14 - F4 F13) dx4 + (F3 F15 - F5 F13) dx5 + dx_s, s>=6
    DELTA4B   (F3 F24 - F4 F23) dx4 + (F3 F25 - F5 F23) dx5 + dx_s, s>=6
    DELTA4P   (F3 F14 - F4 F13) dx1 + (F3 F24 - F4 F23) dx2 + dx_s, s>=6

Integrability is tested by the differential-forms criterion: for each
generator t^i of a system spanned by t^1..t^k, the (k+2)-form
d t^i ^ t^1 ^ ... ^ t^k must vanish.  This avoids constructing a smooth
kernel basis and works at a single point from order-1 jets of the
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .web import Point, WebFunction, as_point

DEFAULT_RANK_TOL = 1e-8
DEFAULT_FROBENIUS_TOL = 1e-7
NON_INTEGRABLE_FLOOR = 1e-3
NORM_FLOOR = 1e-12

SYSTEM_NAMES = ("S10", "S11", "S12", "S13", "S10_11", "THETA_RHO",
                "DELTA2", "DELTA3", "DELTA4", "DELTA4B", "DELTA4P")


@dataclass(frozen=True)
class CoFormField:
    """A 1-form field: coefficient values and their Jacobian at a point.

    ``evaluate(p)`` returns (c, dc) with c[i] the dx_{i+1} coefficient and
    dc[i, j] = d c_i / d x_{j+1}.
    """

    arity: int
    label: str
    evaluate: Callable[[Point], tuple[np.ndarray, np.ndarray]]

    def coefficients(self, p: Sequence[float]) -> np.ndarray:
        return self.evaluate(as_point(p, self.arity))[0]

    @classmethod
    def constant(cls, coeffs: Sequence[float], label: str) -> "CoFormField":
        c = np.asarray(coeffs, dtype=float)
        n = len(c)
        zero = np.zeros((n, n))
        return cls(n, label, lambda p: (c.copy(), zero.copy()))

    @classmethod
    def coordinate(cls, n: int, index: int) -> "CoFormField":
        c = np.zeros(n)
        c[index - 1] = 1.0
        return cls.constant(c, f"dx{index}")

    @classmethod
    def gradient(cls, web: WebFunction) -> "CoFormField":
        """dF: coefficients F_i, Jacobian the (symmetric) Hessian."""
        def ev(p: Point):
            jet = web.jet(p, 2, check_regularity=False)
            return jet.gradient(), jet.hessian()
        return cls(web.arity, "dF", ev)


@dataclass(frozen=True)
class PfaffianSystem:
    """Named list of 1-form fields plus constant coordinate forms dx_s."""

    name: str
    arity: int
    fields: tuple[CoFormField, ...]
    sigma: tuple[int, ...] = ()
    expected_kernel_dim: int | None = None

    def __post_init__(self):
        if len(self.fields) + len(self.sigma) > self.arity:
            raise ValueError("more generators than the arity allows")
        for f in self.fields:
            if f.arity != self.arity:
                raise ValueError("field arity mismatch")

    @property
    def generators(self) -> tuple[CoFormField, ...]:
        return self.fields + tuple(
            CoFormField.coordinate(self.arity, s) for s in self.sigma)


def _mixed(jet, p_idx: int, cols: Sequence[int]) -> np.ndarray:
    return np.array([jet.deriv((p_idx, c)) for c in cols])


def _web_field(web: WebFunction, label: str,
               coeff_fn: Callable[[object], np.ndarray],
               grad_fn: Callable[[object], np.ndarray]) -> CoFormField:
    def ev(p: Point):
        jet = web.jet(p, 3)
        return coeff_fn(jet), grad_fn(jet)
    return CoFormField(web.arity, label, ev)


def _torsion_row_field(web: WebFunction, row: int, cols: tuple[int, ...],
                       slots: tuple[int, ...], label: str) -> CoFormField:
    """Form sum_j F_{row, cols[j]} dx_{slots[j]} with full coefficient Jacobian."""
    n = web.arity

    def ev(p: Point):
        jet = web.jet(p, 3)
        c = np.zeros(n)
        dc = np.zeros((n, n))
        for col, slot in zip(cols, slots):
            c[slot - 1] = jet.deriv((row, col))
            for g in range(1, n + 1):
                dc[slot - 1, g - 1] = jet.deriv((row, col, g))
        return c, dc

    return CoFormField(n, label, ev)


def make_system(web: WebFunction, name: str) -> PfaffianSystem:
    n = web.arity
    name = name.upper()
    if name not in SYSTEM_NAMES:
        raise ValueError(f"unknown system {name!r}; choose from {SYSTEM_NAMES}")
    if name.startswith("DELTA") and n < 5:
        raise ValueError(f"{name} needs arity n >= 5, got {n}")

    def sigma_from(start: int) -> tuple[int, ...]:
        return tuple(range(start, n + 1))

    if name in ("S10", "S11", "S12", "S13", "S10_11", "THETA_RHO"):
        theta_row1 = _torsion_row_field(web, 1, (3, 4), (3, 4), "F13 dx3 + F14 dx4")
        theta_row2 = _torsion_row_field(web, 2, (3, 4), (3, 4), "F23 dx3 + F24 dx4")
        rho_col3 = _torsion_row_field(web, 3, (1, 2), (1, 2), "F13 dx1 + F23 dx2")
        rho_col4 = _torsion_row_field(web, 4, (1, 2), (1, 2), "F14 dx1 + F24 dx2")
        fields = {
            "S10": (theta_row1,), "S11": (theta_row2,),
            "S12": (rho_col3,), "S13": (rho_col4,),
            "S10_11": (theta_row1, theta_row2),
            "THETA_RHO": (theta_row1, rho_col3),
        }[name]
        kern = {"S10": 3, "S11": 3, "S12": 3, "S13": 3, "S10_11": 2, "THETA_RHO": 2}[name]
        return PfaffianSystem(name, n, fields, sigma_from(5), kern)

    if name == "DELTA2":
        def grad_345(p: Point):
            jet = web.jet(p, 3)
            c = np.zeros(n)
            dc = np.zeros((n, n))
            for slot in (3, 4, 5):
                c[slot - 1] = jet.deriv((slot,))
                for g in range(1, n + 1):
                    dc[slot - 1, g - 1] = jet.deriv((slot, g))
            return c, dc

        def grad_12(p: Point):
            jet = web.jet(p, 3)
            c = np.zeros(n)
            dc = np.zeros((n, n))
            for slot in (1, 2):
                c[slot - 1] = jet.deriv((slot,))
                for g in range(1, n + 1):
                    dc[slot - 1, g - 1] = jet.deriv((slot, g))
            return c, dc

        fields = (
            CoFormField(n, "F3 dx3 + F4 dx4 + F5 dx5", grad_345),
            _torsion_row_field(web, 1, (3, 4, 5), (3, 4, 5), "F13 dx3 + F14 dx4 + F15 dx5"),
            _torsion_row_field(web, 2, (3, 4, 5), (3, 4, 5), "F23 dx3 + F24 dx4 + F25 dx5"),
            CoFormField(n, "F1 dx1 + F2 dx2", grad_12),
        )
        return PfaffianSystem(name, n, fields, sigma_from(6), 2)

    if name == "DELTA3":
        def row_field(b: int) -> CoFormField:
            def ev(p: Point):
                jet = web.jet(p, 3)
                c = np.zeros(n)
                dc = np.zeros((n, n))
                c[0] = jet.deriv((1, b))
                c[1] = jet.deriv((2, b))
                c[2] = jet.deriv((b,)) * jet.deriv((3,))
                for g in range(1, n + 1):
                    dc[0, g - 1] = jet.deriv((1, b, g))
                    dc[1, g - 1] = jet.deriv((2, b, g))
                    dc[2, g - 1] = (jet.deriv((b, g)) * jet.deriv((3,))
                                    + jet.deriv((b,)) * jet.deriv((3, g)))
                return c, dc
            return CoFormField(n, f"F1{b} dx1 + F2{b} dx2 + F{b}*F3 dx3", ev)

        fields = tuple(row_field(b) for b in (3, 4, 5))
        return PfaffianSystem(name, n, fields, sigma_from(6), 3)

    # DELTA4 / DELTA4B / DELTA4P: cleared difference forms
    row = 2 if name == "DELTA4B" else 1
    slots = (1, 2) if name == "DELTA4P" else (4, 5)

    def diff_field(p: Point):
        jet = web.jet(p, 3)
        c = np.zeros(n)
        dc = np.zeros((n, n))
        if name == "DELTA4P":
            pairs = (((1, 4), (1, 3), 4, 3, 1), ((2, 4), (2, 3), 4, 3, 2))
        else:
            pairs = (((row, 4), (row, 3), 4, 3, 4), ((row, 5), (row, 3), 5, 3, 5))
        for (hi_idx, lo_idx, hb, lb, slot) in pairs:
            f_hi = jet.deriv(hi_idx)
            f_lo = jet.deriv(lo_idx)
            g_hi = jet.deriv((hb,))
            g_lo = jet.deriv((lb,))
            c[slot - 1] = g_lo * f_hi - g_hi * f_lo
            for g in range(1, n + 1):
                dc[slot - 1, g - 1] = (jet.deriv((lb, g)) * f_hi
                                       + g_lo * jet.deriv(tuple(sorted(hi_idx + (g,))))
                                       - jet.deriv((hb, g)) * f_lo
                                       - g_hi * jet.deriv(tuple(sorted(lo_idx + (g,)))))
        return c, dc

    labels = {
        "DELTA4": "(F3 F14 - F4 F13) dx4 + (F3 F15 - F5 F13) dx5",
        "DELTA4B": "(F3 F24 - F4 F23) dx4 + (F3 F25 - F5 F23) dx5",
        "DELTA4P": "(F3 F14 - F4 F13) dx1 + (F3 F24 - F4 F23) dx2",
    }
    fields = (CoFormField(n, labels[name], diff_field),)
    return PfaffianSystem(name, n, fields, sigma_from(6), 4)


def coefficient_matrix(sys: PfaffianSystem, p: Sequence[float]) -> np.ndarray:
    return np.array([g.coefficients(p) for g in sys.generators])


def rank_at(sys: PfaffianSystem, p: Sequence[float],
            tol: float = DEFAULT_RANK_TOL) -> tuple[int, int]:
    """(rank, kernel dimension) of the span at p, by singular values."""
    mat = coefficient_matrix(sys, p)
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, sys.arity
    rank = int((sv > tol * sv[0]).sum())
    return rank, sys.arity - rank


def kernel_basis(sys: PfaffianSystem, p: Sequence[float],
                 tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the common kernel at p."""
    mat = coefficient_matrix(sys, p)
    _, sv, vt = np.linalg.svd(mat)
    top = sv[0] if sv.size else 0.0
    rank = int((sv > tol * top).sum()) if top > 0 else 0
    return vt[rank:].T


def subspace_distance(b1: np.ndarray, b2: np.ndarray) -> float:
    """Operator-norm distance between orthogonal projectors onto the spans."""
    p1 = b1 @ b1.T
    p2 = b2 @ b2.T
    return float(np.linalg.norm(p1 - p2, 2))


def d_form(f: CoFormField, p: Sequence[float]) -> np.ndarray:
    """Exterior derivative coefficients (dt)_ij = d_i c_j - d_j c_i."""
    _, jac = f.evaluate(as_point(p, f.arity))
    return jac.T - jac


def _wedge_max(dtheta: np.ndarray, thetas: Sequence[np.ndarray]) -> float:
    """Max absolute coefficient of dtheta ^ theta_1 ^ ... ^ theta_k.

    Expansion over index subsets: for each sorted subset S of size k+2 and
    each position pair p<q inside S, the contribution is
    (-1)^(p+q-1) dtheta[S_p, S_q] * minor of the theta rows on S without p, q.
    """
    n = dtheta.shape[0]
    k = len(thetas)
    deg = k + 2
    if deg > n:
        return 0.0
    theta_mat = np.array(thetas) if k else np.empty((0, n))
    best = 0.0
    for subset in combinations(range(n), deg):
        total = 0.0
        for pi, qi in combinations(range(deg), 2):
            a = dtheta[subset[pi], subset[qi]]
            if a == 0.0:
                continue
            rest = [subset[r] for r in range(deg) if r not in (pi, qi)]
            minor = np.linalg.det(theta_mat[:, rest]) if k else 1.0
            total += (-1.0) ** (pi + qi - 1) * a * minor
        best = max(best, abs(total))
    return best


@dataclass(frozen=True)
class FrobeniusReport:
    system: str
    point: np.ndarray = field(repr=False)
    rank: int
    kernel_dim: int
    residuals: tuple[float, ...]
    tol: float
    verdict: str  # integrable | non_integrable | inconclusive | degenerate

    @property
    def max_residual(self) -> float:
        return max(self.residuals) if self.residuals else 0.0

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "point": np.asarray(self.point).tolist(),
            "rank": self.rank,
            "kernel_dim": self.kernel_dim,
            "residuals": list(self.residuals),
            "max_residual": self.max_residual,
            "tol": self.tol,
            "verdict": self.verdict,
        }


def frobenius_residual(sys: PfaffianSystem, p: Sequence[float],
                       tol: float = DEFAULT_FROBENIUS_TOL,
                       rank_tol: float = DEFAULT_RANK_TOL) -> FrobeniusReport:
    """Normalized residuals of d t^i ^ t^1 ^ ... ^ t^k per generator.

    Residuals are divided by ||d t^i|| times the product of generator norms
    (floored at 1e-12); a generator with d t^i = 0 contributes residual 0.
    Verdict: 'integrable' below tol, 'non_integrable' above the 1e-3 floor,
    'inconclusive' between, 'degenerate' when the generators are dependent
    at p.
    """
    point = as_point(p, sys.arity)
    gens = sys.generators
    k = len(gens)
    coeffs = [g.coefficients(point) for g in gens]
    mat = np.array(coeffs)
    sv = np.linalg.svd(mat, compute_uv=False)
    rank = int((sv > rank_tol * sv[0]).sum()) if sv.size and sv[0] > 0 else 0
    if rank < k:
        return FrobeniusReport(sys.name, point, rank, sys.arity - rank, (), tol,
                               "degenerate")
    norms = [max(float(np.linalg.norm(c)), NORM_FLOOR) for c in coeffs]
    norm_product = float(np.prod(norms))
    residuals = []
    for i, g in enumerate(gens):
        dtheta = d_form(g, point)
        dnorm = float(np.sqrt((dtheta[np.triu_indices_from(dtheta, 1)] ** 2).sum()))
        if dnorm == 0.0:
            residuals.append(0.0)
            continue
        raw = _wedge_max(dtheta, coeffs)
        residuals.append(raw / max(dnorm * norm_product, NORM_FLOOR))
    worst = max(residuals)
    if worst < tol:
        verdict = "integrable"
    elif worst > NON_INTEGRABLE_FLOOR:
        verdict = "non_integrable"
    else:
        verdict = "inconclusive"
    return FrobeniusReport(sys.name, point, rank, sys.arity - rank,
                           tuple(residuals), tol, verdict)
