"""Daily economic variables and their correlation with daily alpha.

Per (stock, day, side, variable) we record the mean duration, the activity
(series length), the mean quantity of the qualifying events, the daily log
return of the mid-price and a sub-sampled realized variance. ``correlate``
gives a Pearson coefficient with the two-sided 1% critical value.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np
from scipy import stats

from .book import ClassifiedEvent
from .durations import DEFAULT_BEST_ONLY, DurationSeries, Events, Variable, event_table, qualifying_mask
from .events import SessionWindow, Side

ECON_FIELDS = ("avg_duration_ms", "activity", "avg_quantity", "daily_log_return", "realized_variance")


class EconError(ValueError):
    pass


class EmptyDay(EconError):
    pass


class InsufficientPath(EconError):
    pass


class InsufficientData(EconError):
    pass


class ZeroVariance(EconError):
    pass


@dataclass
class DailyEcon:
    stock_id: str
    day: date | None
    side: Side
    variable: Variable
    avg_duration_ms: float
    activity: int
    avg_quantity: float
    daily_log_return: float
    realized_variance: float


@dataclass
class CorrelationResult:
    variable_pair: tuple[str, str]
    r: float
    n: int
    significant_99: bool
    r_critical: float


class MidPath:
    """Piecewise-constant mid-price path; NaN marks a one-sided book."""

    def __init__(self, times: Sequence[int], mids: Sequence[float]):
        self.times = np.asarray(times, dtype=np.int64)
        self.mids = np.asarray(mids, dtype=np.float64)
        if self.times.shape != self.mids.shape:
            raise ValueError("times and mids must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) < 0):
            raise ValueError("mid-price times must be non-decreasing")

    @classmethod
    def from_replay(cls, path: Sequence[tuple[int, int | None]]) -> "MidPath":
        """Build from :func:`lobfractal.book.replay_with_mid_path` output
        (``best_bid + best_ask`` in ticks)."""
        times = [t for t, _ in path]
        mids = [math.nan if m is None else m / 2.0 for _, m in path]
        return cls(times, mids)

    def __len__(self) -> int:
        return int(self.times.size)

    def sample(self, at: np.ndarray) -> np.ndarray:
        """Last-known mid at each instant; NaN before the first point."""
        idx = np.searchsorted(self.times, at, side="right") - 1
        out = np.full(np.shape(at), np.nan)
        ok = idx >= 0
        out[ok] = self.mids[idx[ok]]
        return out

    def valid(self) -> np.ndarray:
        return self.mids[np.isfinite(self.mids) & (self.mids > 0)]


def realized_variance(
    path: MidPath,
    session: SessionWindow | tuple[int, int],
    grid_seconds: int = 300,
    n_offsets: int = 30,
) -> float:
    """Sub-sampled and averaged realized variance of the log mid-price.

    For each offset ``o = k * grid_seconds / n_offsets`` the path is sampled
    (last value forward) at ``start + o, start + o + grid, ...`` up to the
    session end inclusive, squared log returns are summed, and the sums are
    averaged over the offsets that produced at least one return. Samples that
    fall on a one-sided book are skipped.

    Raises:
        InsufficientPath: no offset grid has two valid samples.
    """
    if isinstance(session, SessionWindow):
        start, end = session.start, session.end
    else:
        start, end = session
    grid_ms = grid_seconds * 1000
    if grid_ms <= 0 or n_offsets < 1 or grid_ms % n_offsets:
        raise ValueError("grid_seconds * 1000 must be a positive multiple of n_offsets")
    step = grid_ms // n_offsets
    sums = []
    for k in range(n_offsets):
        at = np.arange(start + k * step, end + 1, grid_ms)
        mids = path.sample(at)
        mids = mids[np.isfinite(mids) & (mids > 0)]
        if mids.size < 2:
            continue
        r = np.diff(np.log(mids))
        sums.append(float(r @ r))
    if not sums:
        raise InsufficientPath("no sub-sampling grid holds two valid mid-prices")
    return float(np.mean(sums))


def daily_log_return(path: MidPath) -> float:
    mids = path.valid()
    if mids.size == 0:
        raise InsufficientPath("no two-sided quote during the session")
    return float(math.log(mids[-1] / mids[0]))


def daily_economics(
    series: DurationSeries,
    events: Events | Sequence[ClassifiedEvent],
    path: MidPath,
    session: SessionWindow | tuple[int, int],
    best_only: bool | None = None,
    grid_seconds: int = 300,
    n_offsets: int = 30,
) -> DailyEcon:
    """Economic variables of one (stock, day, side, variable).

    ``avg_quantity`` averages the quantity of the events that qualify for the
    series (same kind, side and best-level filter).

    Raises:
        EmptyDay: the duration series is empty.
    """
    if series.n == 0:
        raise EmptyDay(f"no {series.variable.value} durations on {series.side.name}")
    if best_only is None:
        best_only = DEFAULT_BEST_ONLY[series.variable]
    table = event_table(events)
    qty = table.quantity[qualifying_mask(table, series.variable.kind, series.side, best_only)]
    try:
        ret = daily_log_return(path)
        rv = realized_variance(path, session, grid_seconds, n_offsets)
    except InsufficientPath:
        ret, rv = math.nan, math.nan
    return DailyEcon(
        series.stock_id,
        series.day,
        series.side,
        series.variable,
        float(series.values.mean()),
        series.n,
        float(qty.mean()) if qty.size else math.nan,
        ret,
        rv,
    )


def critical_r(n: int, significance: float = 0.01) -> float:
    """Two-sided critical |r| for ``n`` pairs: ``t / sqrt(n - 2 + t^2)``."""
    if n < 3:
        raise InsufficientData("need at least three pairs")
    dof = n - 2
    t = float(stats.t.ppf(1.0 - significance / 2.0, dof))
    return t / math.sqrt(dof + t * t)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ZeroVariance("one of the inputs is constant")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(
    alphas: Sequence[float],
    econ: Sequence[float],
    variable_pair: tuple[str, str] = ("alpha", "x"),
    significance: float = 0.01,
) -> CorrelationResult:
    """Pearson correlation of daily alpha with one economic variable.

    Pairs where either value is missing (None or NaN) are dropped.

    Raises:
        InsufficientData: fewer than three complete pairs or unequal lengths.
        ZeroVariance: either side is constant.
    """
    if len(alphas) != len(econ):
        raise InsufficientData("alpha and economic sequences differ in length")
    a = np.array([math.nan if v is None else v for v in alphas], dtype=np.float64)
    b = np.array([math.nan if v is None else v for v in econ], dtype=np.float64)
    keep = np.isfinite(a) & np.isfinite(b)
    a, b = a[keep], b[keep]
    n = int(a.size)
    r_crit = critical_r(n, significance)
    r = pearson(a, b)
    return CorrelationResult(tuple(variable_pair), r, n, abs(r) > r_crit, r_crit)


def econ_to_csv(rows: Sequence[DailyEcon]) -> str:
    buf = io.StringIO()
    buf.write("stock,day,side,variable," + ",".join(ECON_FIELDS) + "\n")
    for e in rows:
        day = "" if e.day is None else f"{e.day:%Y-%m-%d}"
        vals = ",".join(_fmt(getattr(e, f)) for f in ECON_FIELDS)
        buf.write(f"{e.stock_id},{day},{e.side.name},{e.variable.value},{vals}\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if not math.isfinite(v) else f"{v:.12g}"
