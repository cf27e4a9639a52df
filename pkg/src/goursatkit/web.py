"""Webs given by a defining function: co-frame, torsion, Pfaffian derivatives.

A codimension-one (n+1)-web in closed form consists of the n coordinate
foliations x_a = const together with the level sets of a defining function
F(x1..xn).  The working co-frame is w_a = F_a dx_a, which requires the
regularity condition F_a != 0 at every evaluated point.  In this frame the
web's torsion tensor is

    a_ab = F_ab / (F_a F_b),     a != b,

and its covariant (Pfaffian) derivatives with respect to a connection form
w = sum_g gauge[g] * w_g are

    a_abg = (1/F_g) d a_ab/dx_g - a_ab * (gauge[g] + a_ga + a_bg),

where torsion entries with repeated indices are taken as zero (the diagonal
is not defined by the structure equations; zero is the one convention that
makes the formula total).  The connection form is not derivable from the
defining function alone, so it enters as an explicit gauge vector, zero by
default; a_abg is affine in the gauge with slope -a_ab per component.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .jets import Jet

DEFAULT_REGULARITY = 1e-9

Point = np.ndarray


def as_point(p: Sequence[float], n: int) -> Point:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"expected a point with {n} coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


class RegularityError(ArithmeticError):
    """Some first derivative of the defining function vanished."""

    def __init__(self, alpha: int, value: float, threshold: float):
        super().__init__(
            f"|F_{alpha}| = {abs(value):.3e} <= {threshold:.1e}: "
            f"co-frame degenerates along x{alpha}"
        )
        self.alpha = alpha
        self.value = value


@dataclass(frozen=True)
class Gauge:
    """Coefficients of the connection form in the co-frame basis."""

    w: tuple[float, ...]

    def __post_init__(self):
        if not all(np.isfinite(self.w)):
            raise ValueError("gauge coefficients must be finite")

    @classmethod
    def zero(cls, n: int) -> "Gauge":
        return cls((0.0,) * n)

    @classmethod
    def of(cls, values: Sequence[float]) -> "Gauge":
        return cls(tuple(float(v) for v in values))

    def __len__(self) -> int:
        return len(self.w)


@dataclass
class WebFunction:
    """Defining function with jet evaluation up to order 3.

    ``evaluator(point, order)`` must return the jet of F at the point over
    the n coordinate slots and be pure up to transparent caching; evaluation
    from concurrent tasks over distinct points is safe for the built-in
    constructors.
    """

    arity: int
    evaluator: Callable[[Point, int], Jet]
    source: str = "closed-form"
    regularity_threshold: float = DEFAULT_REGULARITY
    max_order: int = 3

    def __post_init__(self):
        if self.arity < 4:
            raise ValueError("webs of this family need arity n >= 4")

    def jet(self, p: Sequence[float], order: int, check_regularity: bool = True) -> Jet:
        if not (1 <= order <= self.max_order):
            raise ValueError(f"order must be in 1..{self.max_order}")
        point = as_point(p, self.arity)
        jet = self.evaluator(point, order)
        if check_regularity:
            grad = jet.gradient()
            small = np.abs(grad) <= self.regularity_threshold
            if small.any():
                alpha = int(np.argmax(small)) + 1
                raise RegularityError(alpha, float(grad[alpha - 1]), self.regularity_threshold)
        return jet

    def is_regular(self, p: Sequence[float]) -> bool:
        try:
            self.jet(p, 1)
            return True
        except (RegularityError, ArithmeticError):
            return False

    def value(self, p: Sequence[float]) -> float:
        return self.jet(p, 1, check_regularity=False).value

    def scaled(self, c: float) -> "WebFunction":
        """The web defined by c*F (same foliations, torsion divided by c)."""
        base = self.evaluator
        return WebFunction(
            arity=self.arity,
            evaluator=lambda p, order: base(p, order) * c,
            source=self.source,
            regularity_threshold=self.regularity_threshold,
            max_order=self.max_order,
        )

    @classmethod
    def from_expr(cls, expression, params: dict | None = None,
                  regularity_threshold: float = DEFAULT_REGULARITY) -> "WebFunction":
        """Closed-form web from an :class:`~goursatkit.expr.Expr`."""
        from . import jets as J

        params = dict(params or {})
        n = expression.arity
        missing = expression.parameters_used - set(params)
        if missing:
            raise ValueError(f"unbound parameters: {sorted(missing)}")
        names = [f"x{i}" for i in range(1, n + 1)]

        def evaluator(point: Point, order: int) -> Jet:
            env = {name: float(point[i]) for i, name in enumerate(names)}
            env.update(params)
            return J.eval_jet(expression, env, names, order)

        return cls(arity=n, evaluator=evaluator, source="closed-form",
                   regularity_threshold=regularity_threshold)


@dataclass(frozen=True)
class TorsionTensor:
    """Off-diagonal symmetric matrix of torsion components at a point.

    The diagonal is not part of the tensor and reads back as NaN; use
    :meth:`entry_or_zero` where a formula sums over all indices.
    """

    n: int
    values: np.ndarray = field(repr=False)  # (n, n), diagonal NaN

    def __post_init__(self):
        if self.values.shape != (self.n, self.n):
            raise ValueError("torsion matrix shape mismatch")

    def entry(self, alpha: int, beta: int) -> float:
        if alpha == beta:
            raise IndexError("diagonal torsion components are not defined")
        return float(self.values[alpha - 1, beta - 1])

    def entry_or_zero(self, alpha: int, beta: int) -> float:
        if alpha == beta:
            return 0.0
        return float(self.values[alpha - 1, beta - 1])

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
        return np.array([[self.entry(r, c) for c in cols] for r in rows])

    def row_vanishes(self, p: int, cols: Sequence[int] = (3, 4, 5),
                     tol: float = 1e-10) -> bool:
        return all(abs(self.entry(p, c)) < tol for c in cols if c != p)

    @classmethod
    def from_matrix(cls, values: np.ndarray) -> "TorsionTensor":
        a = np.asarray(values, dtype=float).copy()
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("torsion matrix must be square")
        off = ~np.eye(n, dtype=bool)
        if not np.array_equal(a[off], a.T[off]):
            a = (a + a.T) / 2.0
        np.fill_diagonal(a, np.nan)
        return cls(n, a)


@dataclass(frozen=True)
class PfaffianDerivs:
    """Values a_abg at a point, symmetric in the first two slots."""

    n: int
    values: np.ndarray = field(repr=False)  # (n, n, n); [a-1, b-1, g-1], diag(a,b) NaN
    gauge: Gauge = None

    def entry(self, alpha: int, beta: int, gamma: int) -> float:
        if alpha == beta:
            raise IndexError("first two indices must differ")
        return float(self.values[alpha - 1, beta - 1, gamma - 1])

    @classmethod
    def from_array(cls, values: np.ndarray, gauge: Gauge | None = None) -> "PfaffianDerivs":
        a = np.asarray(values, dtype=float).copy()
        n = a.shape[0]
        a = (a + a.transpose(1, 0, 2)) / 2.0  # enforce first-slot symmetry
        for i in range(n):
            a[i, i, :] = np.nan
        return cls(n, a, gauge or Gauge.zero(n))

    def regauged(self, torsion: TorsionTensor, new_gauge: Gauge) -> "PfaffianDerivs":
        """Exact affine transport to another gauge: shift by -a_ab * (w' - w)."""
        dw = np.asarray(new_gauge.w) - np.asarray(self.gauge.w)
        shifted = self.values - torsion.values[:, :, None] * dw[None, None, :]
        for i in range(self.n):
            shifted[i, i, :] = np.nan
        return PfaffianDerivs(self.n, shifted, new_gauge)


def coframe(web: WebFunction, p: Sequence[float]) -> np.ndarray:
    """Rows are the co-frame covectors: row a has F_a in slot a, else 0."""
    jet = web.jet(p, 1)
    return np.diag(jet.gradient())


def torsion(web: WebFunction, p: Sequence[float]) -> TorsionTensor:
    jet = web.jet(p, 2)
    grad = jet.gradient()
    hess = jet.hessian()
    values = hess / np.outer(grad, grad)
    np.fill_diagonal(values, np.nan)
    return TorsionTensor(web.arity, values)


def pfaffian_derivs(web: WebFunction, p: Sequence[float],
                    gauge: Gauge | None = None) -> PfaffianDerivs:
    n = web.arity
    gauge = gauge or Gauge.zero(n)
    if len(gauge) != n:
        raise ValueError("gauge length must equal the web arity")
    jet = web.jet(p, 3)
    grad = jet.gradient()
    hess = jet.hessian()
    third = np.empty((n, n, n))
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            for k in range(j, n + 1):
                v = jet.deriv((i, j, k))
                third[i - 1, j - 1, k - 1] = v
                third[i - 1, k - 1, j - 1] = v
                third[j - 1, i - 1, k - 1] = v
                third[j - 1, k - 1, i - 1] = v
                third[k - 1, i - 1, j - 1] = v
                third[k - 1, j - 1, i - 1] = v

    a = hess / np.outer(grad, grad)
    np.fill_diagonal(a, 0.0)
    w = np.asarray(gauge.w)
    # a_abg = (1/F_g) d_g a_ab - a_ab (a_ga + a_bg) - a_ab w_g, with
    # zero-diagonal torsion inside the bracket.  Each (a, b) pair is computed
    # once and mirrored, so first-slot symmetry is exact; the gauge term is
    # subtracted separately, so the affine-in-gauge slope -a_ab is exact too.
    vals = np.full((n, n, n), np.nan)
    for al in range(n):
        for be in range(al + 1, n):
            t_ab = a[al, be]
            for g in range(n):
                da = (third[al, be, g]
                      - hess[al, be] * hess[al, g] / grad[al]
                      - hess[al, be] * hess[be, g] / grad[be]) / (grad[al] * grad[be])
                bracket = a[g, al] + a[be, g]
                val = da / grad[g] - t_ab * bracket - t_ab * w[g]
                vals[al, be, g] = val
                vals[be, al, g] = val
    return PfaffianDerivs(n, vals, gauge)


class _WarmStartCache:
    """Thread-safe memo of parameter roots keyed by point bytes.

    Semantically transparent: hits return exactly the value a fresh solve
    from the same warm start produced.  Also tracks the most recent root as
    the warm start for branch continuity along a deterministic point sweep.
    """

    def __init__(self, maxsize: int = 4096):
        self._lock = threading.Lock()
        self._store: dict[bytes, float] = {}
        self._maxsize = maxsize
        self.last_root: float | None = None

    def get(self, key: bytes) -> float | None:
        with self._lock:
            return self._store.get(key)

    def put(self, key: bytes, root: float):
        with self._lock:
            if len(self._store) >= self._maxsize:
                self._store.clear()
            self._store[key] = root
            self.last_root = root

    def warm_start(self) -> float | None:
        with self._lock:
            return self.last_root
