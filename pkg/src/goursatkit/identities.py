"""Scalar identities linking torsion components and their Pfaffian derivatives.

Naming of the condition families (h ranges over derivative slots):

    m_h   mixed-row closure:  sum of the six products c_pq * a_pqh where
          c_pq is the derivative of the second-kind determinant with respect
          to a_pq; conditions: m_1 = m_2 = m_s = 0 (s >= 6),
          m_3 = C a34 + A a35, m_4 = B a34 + A a45, m_5 = B a35 + C a45.
    n_h   row-1 closure: (a15-a14) a13h + (a13-a15) a14h + (a14-a13) a15h;
          conditions: n_1 = n_2 = 0, n_3 = a13 [(a15-a13) a34 + (a13-a14) a35].
    r_h   row-2 closure: same pattern on the second torsion row;
          conditions: r_1 = r_2 = 0, r_3 = a23 [(a25-a23) a34 + (a23-a24) a35].
    s_h   cross-row difference closure:
          (a23-a25)(a14h - a13h) + (a15-a13)(a24h - a23h), h = 3, 4, 5;
          conditions: s_3 = -C a34, s_4 = B a34, s_5 = C (a35 - a45).
    u_k, v_k  first-column closures, k = 4, 5:
          u_k = (a23-a24) a13k - (a14-a13) a23k,
          v_k = (a23-a24) a14k - (a14-a13) a24k;
          conditions: u_4 = 2A a34, u_5 = 2A a35,
          v_4 - u_4 = -A a34, v_5 - u_5 = A (a34 - a35).

(A, B, C) are the cyclic 2x2 minors of the (1,2)x(3,4,5) torsion block.
All evaluators return condition residuals (left side minus right side), each
with the magnitude of its largest monomial for relative comparison.

Gauge behavior: n_h and r_h are gauge-invariant identically; s_h and m_h are
affine in the gauge with slopes proportional to second-kind residuals (the
cleared difference-ratio and twice the determinant), hence gauge-invariant on
second-kind data; u_k, v_k carry genuinely nonzero slopes and are reported at
the caller's gauge.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Sequence

import numpy as np

from .classify import SCALE_FLOOR, torsion_minors
from .web import Gauge, PfaffianDerivs, TorsionTensor

# coefficient of a_pqh in the m-closure: d(det)/d a_pq
M_COEFFS = (
    ((2, 4), (2, 5), (1, 3)),  # (a24 - a25) * a13h
    ((2, 5), (2, 3), (1, 4)),
    ((2, 3), (2, 4), (1, 5)),
    ((1, 5), (1, 4), (2, 3)),
    ((1, 3), (1, 5), (2, 4)),
    ((1, 4), (1, 3), (2, 5)),
)


def _scale(monomials: Sequence[float]) -> float:
    return max([abs(m) for m in monomials] + [SCALE_FLOOR])


@dataclass(frozen=True)
class ResidualSet:
    """Residual values paired with their relative-comparison scales."""

    values: np.ndarray
    scales: np.ndarray

    @property
    def relative(self) -> np.ndarray:
        return np.abs(self.values) / self.scales

    @property
    def max_relative(self) -> float:
        return float(self.relative.max()) if self.values.size else 0.0


def first_kind_derivative_residuals(t: TorsionTensor, d: PfaffianDerivs) -> ResidualSet:
    """a24 a13c + a13 a24c - a14 a23c - a23 a14c for c = 1..4.

    Vanishes on first-kind webs; the gauge contribution is
    -2 w_c (a13 a24 - a14 a23), so the residual is gauge-invariant exactly
    when the first-kind condition holds.
    """
    values = np.empty(4)
    scales = np.empty(4)
    for c in range(1, 5):
        monos = (t.entry(2, 4) * d.entry(1, 3, c),
                 t.entry(1, 3) * d.entry(2, 4, c),
                 -t.entry(1, 4) * d.entry(2, 3, c),
                 -t.entry(2, 3) * d.entry(1, 4, c))
        values[c - 1] = sum(monos)
        scales[c - 1] = _scale(monos)
    return ResidualSet(values, scales)


def second_kind_polynomial_residuals(t: TorsionTensor) -> dict[tuple, ResidualSet]:
    """The two torsion-only polynomial consequences of the second-kind
    condition, for every admissible index selection.

    Keyed by (p, q, a, b, c) with p != q in {1, 2} and (a, b, c) a permutation
    of (3, 4, 5); each value holds the linear and the quadratic residual.
    """
    out: dict[tuple, ResidualSet] = {}
    for p, q in ((1, 2), (2, 1)):
        for (a, b, c) in permutations((3, 4, 5)):
            pa, pb, pc = (t.entry(p, i) for i in (a, b, c))
            qa, qb, qc = (t.entry(q, i) for i in (a, b, c))
            lin = (pa * (qc - qb), pb * (qa - qc), pc * (qb - qa))
            quad = (pa * pa * (qb - qc), pb * pb * (qc - qa), pc * pc * (qa - qb),
                    pa * qa * (pc - pb), pb * qb * (pa - pc), pc * qc * (pb - pa))
            out[(p, q, a, b, c)] = ResidualSet(
                np.array([sum(lin), sum(quad)]),
                np.array([_scale(lin), _scale(quad)]),
            )
    return out


@dataclass(frozen=True)
class ConditionValues:
    """Residuals of the named condition families at one point and gauge."""

    m: ResidualSet           # length n
    n_row1: ResidualSet      # h = 1, 2, 3
    r_row2: ResidualSet      # h = 1, 2, 3
    s_cross: ResidualSet     # h = 3, 4, 5
    u_col: ResidualSet       # k = 4, 5
    v_col: ResidualSet       # k = 4, 5 (conditions on v_k - u_k)
    residual40: float
    residual40_scale: float

    def to_dict(self) -> dict:
        return {
            "m": self.m.values.tolist(),
            "n": self.n_row1.values.tolist(),
            "r": self.r_row2.values.tolist(),
            "s": self.s_cross.values.tolist(),
            "u": self.u_col.values.tolist(),
            "v": self.v_col.values.tolist(),
            "residual40": self.residual40,
        }


def _m_residual(t: TorsionTensor, d: PfaffianDerivs, h: int,
                A: float, B: float, C: float) -> tuple[float, float]:
    monos = []
    for (hi, lo, tgt) in M_COEFFS:
        coeff = t.entry(*hi) - t.entry(*lo)
        monos.append(coeff * d.entry(tgt[0], tgt[1], h))
    rhs = 0.0
    if h == 3:
        rhs = C * t.entry(3, 4) + A * t.entry(3, 5)
    elif h == 4:
        rhs = B * t.entry(3, 4) + A * t.entry(4, 5)
    elif h == 5:
        rhs = B * t.entry(3, 5) + C * t.entry(4, 5)
    value = sum(monos) - rhs
    return value, _scale(monos + [rhs])


def _n_residual(t: TorsionTensor, d: PfaffianDerivs, h: int, row: int) -> tuple[float, float]:
    a3, a4, a5 = (t.entry(row, q) for q in (3, 4, 5))
    monos = [(a5 - a4) * d.entry(row, 3, h),
             (a3 - a5) * d.entry(row, 4, h),
             (a4 - a3) * d.entry(row, 5, h)]
    rhs = 0.0
    if h == 3:
        rhs = a3 * ((a5 - a3) * t.entry(3, 4) + (a3 - a4) * t.entry(3, 5))
    value = sum(monos) - rhs
    return value, _scale(monos + [rhs])


def _s_residual(t: TorsionTensor, d: PfaffianDerivs, h: int,
                A: float, B: float, C: float) -> tuple[float, float]:
    monos = [(t.entry(2, 3) - t.entry(2, 5)) * (d.entry(1, 4, h) - d.entry(1, 3, h)),
             (t.entry(1, 5) - t.entry(1, 3)) * (d.entry(2, 4, h) - d.entry(2, 3, h))]
    rhs = {3: -C * t.entry(3, 4),
           4: B * t.entry(3, 4),
           5: C * (t.entry(3, 5) - t.entry(4, 5))}[h]
    value = sum(monos) - rhs
    return value, _scale(monos + [rhs])


def _uv(t: TorsionTensor, d: PfaffianDerivs, k: int) -> tuple[float, float, float]:
    cu = t.entry(2, 3) - t.entry(2, 4)
    cv = t.entry(1, 4) - t.entry(1, 3)
    u = cu * d.entry(1, 3, k) - cv * d.entry(2, 3, k)
    v = cu * d.entry(1, 4, k) - cv * d.entry(2, 4, k)
    scale = _scale([cu * d.entry(1, 3, k), cv * d.entry(2, 3, k),
                    cu * d.entry(1, 4, k), cv * d.entry(2, 4, k)])
    return u, v, scale


def condition_values(t: TorsionTensor, d: PfaffianDerivs) -> ConditionValues:
    if t.n < 5:
        raise ValueError("condition families need arity n >= 5")
    A, B, C = torsion_minors(t)
    n = t.n
    m_vals = np.empty(n)
    m_scales = np.empty(n)
    for h in range(1, n + 1):
        m_vals[h - 1], m_scales[h - 1] = _m_residual(t, d, h, A, B, C)
    n_vals = np.empty(3); n_scales = np.empty(3)
    r_vals = np.empty(3); r_scales = np.empty(3)
    for h in (1, 2, 3):
        n_vals[h - 1], n_scales[h - 1] = _n_residual(t, d, h, 1)
        r_vals[h - 1], r_scales[h - 1] = _n_residual(t, d, h, 2)
    s_vals = np.empty(3); s_scales = np.empty(3)
    for i, h in enumerate((3, 4, 5)):
        s_vals[i], s_scales[i] = _s_residual(t, d, h, A, B, C)
    u_vals = np.empty(2); v_vals = np.empty(2)
    u_scales = np.empty(2); v_scales = np.empty(2)
    for i, k in enumerate((4, 5)):
        u, v, scale = _uv(t, d, k)
        a34, a35 = t.entry(3, 4), t.entry(3, 5)
        u_rhs = 2 * A * (a34 if k == 4 else a35)
        v_rhs = -A * a34 if k == 4 else A * (a34 - a35)
        u_vals[i] = u - u_rhs
        v_vals[i] = (v - u) - v_rhs
        u_scales[i] = _scale([scale, u_rhs])
        v_scales[i] = _scale([scale, v_rhs])
    # the one-product closure: n_1 - n_2 written with grouped differences
    a13, a14, a15 = (t.entry(1, q) for q in (3, 4, 5))
    terms40 = [(a15 - a14) * (d.entry(1, 3, 1) - d.entry(1, 3, 2)),
               (a13 - a15) * (d.entry(1, 4, 1) - d.entry(1, 4, 2)),
               (a14 - a13) * (d.entry(1, 5, 1) - d.entry(1, 5, 2))]
    return ConditionValues(
        m=ResidualSet(m_vals, m_scales),
        n_row1=ResidualSet(n_vals, n_scales),
        r_row2=ResidualSet(r_vals, r_scales),
        s_cross=ResidualSet(s_vals, s_scales),
        u_col=ResidualSet(u_vals, u_scales),
        v_col=ResidualSet(v_vals, v_scales),
        residual40=float(sum(terms40)),
        residual40_scale=_scale(terms40),
    )


# --- constrained random sampling -------------------------------------------

def sample_second_kind_torsion(rng: np.random.Generator, n: int = 5,
                               span: float = 2.0, pivot_floor: float = 1e-3) -> TorsionTensor:
    """Random torsion matrix on the second-kind variety.

    All off-diagonal entries are uniform in [-span, span]; a25 is then solved
    from the vanishing of the row-of-ones determinant (linear with pivot
    a14 - a13, redrawn while the pivot is small).
    """
    if n < 5:
        raise ValueError("need n >= 5")
    while True:
        vals = rng.uniform(-span, span, size=(n, n))
        vals = (vals + vals.T) / 2.0
        a13, a14, a15 = vals[0, 2], vals[0, 3], vals[0, 4]
        a23, a24 = vals[1, 2], vals[1, 3]
        if abs(a14 - a13) < pivot_floor:
            continue
        a25 = (a14 * a23 - a13 * a24 + a15 * a24 - a15 * a23) / (a14 - a13)
        if abs(a25) > 10 * span:
            continue
        vals[1, 4] = vals[4, 1] = a25
        return TorsionTensor.from_matrix(vals)


def sample_derivs(rng: np.random.Generator, n: int = 5, span: float = 2.0,
                  gauge: Gauge | None = None) -> PfaffianDerivs:
    vals = rng.uniform(-span, span, size=(n, n, n))
    return PfaffianDerivs.from_array(vals, gauge or Gauge.zero(n))


@dataclass(frozen=True)
class ImplicationResult:
    imposed: tuple[str, str]
    checked: str
    trials: int
    rejected: int
    max_relative: float


_SYSTEMS = ("m", "n", "r")


def _impose_and_check(t: TorsionTensor, d_vals: np.ndarray, h: int,
                      imposed: tuple[str, str], checked: str,
                      pivot_floor: float = 1e-3) -> float | None:
    """Adjust one designated derivative per imposed condition, then evaluate
    the third; returns its relative residual or None when a pivot is small.

    Designated unknowns: the row-1 closure and the mixed closure solve for
    a13h (coefficients a15-a14 and a24-a25); the row-2 closure solves for
    a23h (coefficient a25-a24).  The mixed closure is imposed after the
    single-row one so the solves stay triangular.
    """
    A, B, C = torsion_minors(t)
    d = PfaffianDerivs.from_array(d_vals)

    def rhs(name: str) -> float:
        if h != 3:
            return 0.0
        if name == "m":
            return C * t.entry(3, 4) + A * t.entry(3, 5)
        if name == "n":
            return t.entry(1, 3) * ((t.entry(1, 5) - t.entry(1, 3)) * t.entry(3, 4)
                                    + (t.entry(1, 3) - t.entry(1, 4)) * t.entry(3, 5))
        return t.entry(2, 3) * ((t.entry(2, 5) - t.entry(2, 3)) * t.entry(3, 4)
                                + (t.entry(2, 3) - t.entry(2, 4)) * t.entry(3, 5))

    def residual(name: str) -> tuple[float, float]:
        if name == "m":
            return _m_residual(t, d, h, A, B, C)
        if name == "n":
            return _n_residual(t, d, h, 1)
        return _n_residual(t, d, h, 2)

    order = sorted(imposed, key=lambda s: 0 if s in ("n", "r") else 1)
    for name in order:
        if name == "n":
            pivot = t.entry(1, 5) - t.entry(1, 4)
            slot = (0, 2)  # a13h
        elif name == "r":
            pivot = t.entry(2, 5) - t.entry(2, 4)
            slot = (1, 2)  # a23h
        else:
            free = "n" not in imposed
            if free:
                pivot = t.entry(2, 4) - t.entry(2, 5)  # coefficient of a13h
                slot = (0, 2)
            else:
                pivot = t.entry(1, 5) - t.entry(1, 4)  # coefficient of a23h
                slot = (1, 2)
        if abs(pivot) < pivot_floor:
            return None
        value, _ = residual(name)
        # value is (closure - rhs) with the current unknown included; zero it
        arr = d.values.copy()
        arr[slot[0], slot[1], h - 1] -= value / pivot
        arr[slot[1], slot[0], h - 1] = arr[slot[0], slot[1], h - 1]
        d = PfaffianDerivs.from_array(arr)
        check_val, _ = residual(name)
        if abs(check_val) > 1e-9 * max(1.0, abs(value)):
            return None
    value, scale = residual(checked)
    return abs(value) / scale


def implication_test(trials: int, seed: int, imposed: tuple[str, str],
                     checked: str, levels: Sequence[int] = (1, 2, 3)) -> ImplicationResult:
    """Impose two of the three condition systems on constrained random data
    and report the worst relative residual of the third."""
    if set(imposed) | {checked} != set(_SYSTEMS) or len(set(imposed)) != 2:
        raise ValueError("imposed/checked must partition {'m', 'n', 'r'}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    rejected = 0
    done = 0
    while done < trials:
        t = sample_second_kind_torsion(rng)
        d_vals = rng.uniform(-2.0, 2.0, size=(5, 5, 5))
        ok = True
        trial_worst = 0.0
        for h in levels:
            rel = _impose_and_check(t, d_vals, h, imposed, checked)
            if rel is None:
                ok = False
                break
            trial_worst = max(trial_worst, rel)
        if not ok:
            rejected += 1
            continue
        worst = max(worst, trial_worst)
        done += 1
    return ImplicationResult(tuple(imposed), checked, trials, rejected, worst)


@dataclass(frozen=True)
class WitnessResult:
    found: bool
    trials_used: int
    s_max_relative: float       # how well the imposed conditions hold
    uv_max_relative: float      # size of the checked residual at the witness


def witness_search(trials: int, seed: int, threshold: float = 1e-2) -> WitnessResult:
    """Search for constrained data satisfying the cross-row difference
    conditions while violating one of the first-column conditions.

    Demonstrates that the s-family does not imply the u/v-family.
    """
    rng = np.random.default_rng(seed)
    for trial in range(1, trials + 1):
        t = sample_second_kind_torsion(rng)
        pivot = t.entry(2, 3) - t.entry(2, 5)  # coefficient of a14h in s_h
        if abs(pivot) < 1e-3:
            continue
        d_vals = rng.uniform(-2.0, 2.0, size=(5, 5, 5))
        d = PfaffianDerivs.from_array(d_vals)
        A, B, C = torsion_minors(t)
        arr = d.values.copy()
        for h in (3, 4, 5):
            value, _ = _s_residual(t, d, h, A, B, C)
            arr[0, 3, h - 1] -= value / pivot
            arr[3, 0, h - 1] = arr[0, 3, h - 1]
            d = PfaffianDerivs.from_array(arr)
        cv = condition_values(t, d)
        s_rel = cv.s_cross.max_relative
        uv_rel = max(cv.u_col.max_relative, cv.v_col.max_relative)
        if s_rel <= 1e-10 and uv_rel > threshold:
            return WitnessResult(True, trial, s_rel, uv_rel)
    return WitnessResult(False, trials, float("nan"), float("nan"))
