"""Rank statistics, pseudo-observations, and empirical marginal models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bicop import PDF_CAP, DomainError


class Scale(str, Enum):
    DATA = "data"
    COPULA = "copula"


class ZeroVarianceError(ValueError):
    """A rank correlation is undefined because one column is constant."""


@dataclass
class DataMatrix:
    """An n x d observation matrix on either the data or the copula scale."""

    values: np.ndarray
    scale: Scale = Scale.DATA
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be two-dimensional")
        if not self.columns:
            self.columns = [f"x{i + 1}" for i in range(self.values.shape[1])]
        if len(self.columns) != self.values.shape[1]:
            raise ValueError("column name count does not match matrix width")
        if self.scale is Scale.COPULA:
            if np.any(self.values <= 0.0) or np.any(self.values >= 1.0):
                raise ValueError("copula-scale entries must lie strictly inside (0, 1)")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    @classmethod
    def from_csv(cls, path, scale: Scale = Scale.DATA, columns: list[str] | None = None):
        import pandas as pd

        frame = pd.read_csv(path)
        if columns is not None:
            missing = [c for c in columns if c not in frame.columns]
            if missing:
                raise ValueError(f"{path}: missing column(s) {missing}")
            frame = frame[columns]
        return cls(frame.to_numpy(dtype=float), scale, list(frame.columns))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# ranks and rank correlations

def ranks(x) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("ranks expects a nonempty vector")
    n = x.size
    order = np.argsort(x, kind="stable")
    xs = x[order]
    starts = np.concatenate(([0], np.nonzero(np.diff(xs))[0] + 1))
    ends = np.concatenate((starts[1:], [n]))
    avg = (starts + ends + 1) / 2.0  # mean of 1-based ranks start+1 .. end
    out = np.empty(n, dtype=float)
    out[order] = np.repeat(avg, ends - starts)
    return out


def pseudo_obs(x, jitter_discrete: bool = False, seed: int = 0):
    """Map data-scale columns to (0, 1) via ranks / (n + 1).

    With ``jitter_discrete`` enabled, integer-valued columns get a
    reproducible uniform jitter on [-0.5, 0.5] before ranking so their ties
    break (counter-based generator keyed by ``seed``).
    """
    if isinstance(x, DataMatrix):
        vals = pseudo_obs(x.values, jitter_discrete=jitter_discrete, seed=seed)
        return DataMatrix(vals, Scale.COPULA, list(x.columns))
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
        squeeze = True
    else:
        squeeze = False
    n = arr.shape[0]
    if n < 2:
        raise ValueError("pseudo-observations need at least 2 rows")
    rng = np.random.Generator(np.random.Philox(key=seed)) if jitter_discrete else None
    out = np.empty_like(arr)
    for j in range(arr.shape[1]):
        col = arr[:, j]
        if rng is not None and np.all(col == np.round(col)):
            col = col + rng.uniform(-0.5, 0.5, size=n)
        out[:, j] = ranks(col) / (n + 1.0)
    return out[:, 0] if squeeze else out


def _tie_pair_count(sorted_arr: np.ndarray) -> int:
    starts = np.concatenate(([0], np.nonzero(np.diff(sorted_arr))[0] + 1))
    ends = np.concatenate((starts[1:], [sorted_arr.size]))
    sizes = ends - starts
    return int(np.sum(sizes * (sizes - 1) // 2))


def _count_strict_inversions(a: np.ndarray) -> int:
    """Number of index pairs i < j with a[i] > a[j] (exact integer count).

    Merge recursion with vectorized cross counts; blocks below _LEAF are
    counted by direct comparison.  All counts are integers, so the result is
    bit-identical to full pair enumeration.
    """
    _LEAF = 256

    def rec(arr):
        if arr.size <= _LEAF:
            count = int(np.sum(np.triu(arr[:, None] > arr[None, :], k=1)))
            return np.sort(arr, kind="mergesort"), count
        mid = arr.size // 2
        left, cl = rec(arr[:mid])
        right, cr = rec(arr[mid:])
        # elements of `left` strictly greater than each right element
        cross = left.size * right.size - int(
            np.searchsorted(left, right, side="right").sum()
        )
        merged = np.sort(np.concatenate((left, right)), kind="mergesort")
        return merged, cl + cr + cross

    return rec(np.asarray(a))[1]


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall's tau-b.

    Concordant minus discordant pairs over the geometric mean of the pair
    counts not tied in each coordinate; pairs tied in both coordinates are
    excluded from the tie corrections.  O(n log n) via merge-based inversion
    counting with exact integer arithmetic (equal to the O(n^2) enumeration).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("kendall_tau expects two equal-length vectors")
    n = x.size
    if n < 2:
        raise ValueError("kendall_tau needs at least 2 observations")
    perm = np.lexsort((y, x))
    xs, ys = x[perm], y[perm]
    tot = n * (n - 1) // 2
    n_tie_x = _tie_pair_count(xs)
    n_tie_y = _tie_pair_count(np.sort(y, kind="mergesort"))
    if n_tie_x == tot or n_tie_y == tot:
        raise ZeroVarianceError("kendall_tau undefined for a constant column")
    joint = np.nonzero((np.diff(xs) == 0) & (np.diff(ys) == 0))[0]
    # sizes of maximal runs tied in both coordinates
    n_tie_both = 0
    if joint.size:
        breaks = np.nonzero(np.diff(joint) > 1)[0]
        run_starts = np.concatenate(([0], breaks + 1))
        run_ends = np.concatenate((breaks, [joint.size - 1]))
        sizes = joint[run_ends] - joint[run_starts] + 2
        n_tie_both = int(np.sum(sizes * (sizes - 1) // 2))
    n_disc = _count_strict_inversions(ys)
    conc_minus_disc = tot - n_tie_x - n_tie_y + n_tie_both - 2 * n_disc
    denom = math.sqrt((tot - n_tie_x) * (tot - n_tie_y))
    return min(1.0, max(-1.0, conc_minus_disc / denom))


def spearman_rho(x, y) -> float:
    """Spearman's rho: the Pearson correlation of the two rank vectors."""
    rx = ranks(x)
    ry = ranks(y)
    if rx.shape != ry.shape:
        raise ValueError("spearman_rho expects two equal-length vectors")
    if rx.size < 2:
        raise ValueError("spearman_rho needs at least 2 observations")
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx)) * math.sqrt(float(dy @ dy))
    if denom == 0.0:
        raise ZeroVarianceError("spearman_rho undefined for a constant column")
    return float(dx @ dy) / denom


@dataclass
class CorrelationMatrix:
    """Symmetric rank-correlation matrix with unit diagonal."""

    values: np.ndarray
    kind: str  # "kendall" | "spearman"
    columns: list[str]

    def format_table(self, digits: int = 2) -> str:
        width = max(max(len(c) for c in self.columns), digits + 4) + 2
        head = " " * width + "".join(f"{c:>{width}}" for c in self.columns)
        lines = [head]
        for i, name in enumerate(self.columns):
            cells = "".join(f"{v:>{width}.{digits}f}" for v in self.values[i])
            lines.append(f"{name:>{width}}" + cells)
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("," + ",".join(self.columns) + "\n")
            for name, row in zip(self.columns, self.values):
                fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")


def correlation_matrix(x, kind: str = "kendall") -> CorrelationMatrix:
    """Pairwise Kendall tau-b or Spearman rho over the columns of a matrix."""
    if kind not in ("kendall", "spearman"):
        raise ValueError(f"kind must be 'kendall' or 'spearman', got {kind!r}")
    if isinstance(x, DataMatrix):
        vals, cols = x.values, list(x.columns)
    else:
        vals = np.asarray(x, dtype=float)
        cols = [f"x{i + 1}" for i in range(vals.shape[1])]
    d = vals.shape[1]
    if d < 2:
        raise ValueError("correlation matrix needs at least 2 columns")
    stat = kendall_tau if kind == "kendall" else spearman_rho
    out = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            try:
                out[i, j] = out[j, i] = stat(vals[:, i], vals[:, j])
            except ZeroVarianceError as exc:
                raise ZeroVarianceError(
                    f"columns ({cols[i]}, {cols[j]}): {exc}"
                ) from None
    return CorrelationMatrix(out, kind, cols)


def combined_table(tau: CorrelationMatrix, rho: CorrelationMatrix, digits: int = 2) -> str:
    """Format tau in the lower triangle and rho_s in the upper, unit diagonal."""
    if tau.columns != rho.columns:
        raise ValueError("matrices must share column names")
    d = len(tau.columns)
    merged = np.eye(d)
    for i in range(d):
        for j in range(d):
            if i > j:
                merged[i, j] = tau.values[i, j]
            elif i < j:
                merged[i, j] = rho.values[i, j]
    return CorrelationMatrix(merged, "tau-lower/rho-upper", tau.columns).format_table(digits)


# ---------------------------------------------------------------------------
# empirical marginals

@dataclass(frozen=True)
class EmpiricalMarginal:
    """Order statistics with a piecewise-linear CDF at plotting positions k/(n+1).

    The CDF is the inverse of the interpolated quantile function, so
    quantile(cdf(x_i)) = x_i exactly at sample points with distinct values.
    Outside the sample hull the CDF clamps to [1/(n+1), n/(n+1)].
    """

    sorted_values: np.ndarray
    name: str = ""

    def __post_init__(self):
        sv = np.sort(np.asarray(self.sorted_values, dtype=float), kind="mergesort")
        if sv.size < 2:
            raise ValueError("empirical marginal needs at least 2 observations")
        if np.any(~np.isfinite(sv)):
            raise ValueError("empirical marginal sample must be finite")
        object.__setattr__(self, "sorted_values", sv)

    @property
    def n(self) -> int:
        return self.sorted_values.size

    @property
    def positions(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / (self.n + 1.0)

    def cdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.sorted_values, self.positions)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainError("quantile probability must lie strictly inside (0, 1)")
        return np.interp(p, self.positions, self.sorted_values)

    def pdf(self, x):
        # finite difference of the piecewise-linear CDF (the quantile's inverse)
        span = float(self.sorted_values[-1] - self.sorted_values[0])
        h = max(1e-9, 1e-7 * span)
        x = np.asarray(x, dtype=float)
        slope = (self.cdf(x + h) - self.cdf(x - h)) / (2.0 * h)
        return np.clip(slope, 0.0, PDF_CAP)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.sorted_values[0]), float(self.sorted_values[-1])


def marginal_fit(x, name: str = "") -> EmpiricalMarginal:
    return EmpiricalMarginal(np.asarray(x, dtype=float), name)


def marginal_cdf(m: EmpiricalMarginal, x):
    return m.cdf(x)


def marginal_quantile(m: EmpiricalMarginal, p):
    return m.quantile(p)
