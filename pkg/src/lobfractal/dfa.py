"""Detrended fluctuation analysis.

The pipeline is: profile (cumulative sum of the mean-removed series), split
into non-overlapping windows of ``s`` samples starting at the first sample,
least-squares polynomial detrending inside each window, root of the mean
per-window residual variance ``F(s)``, and a straight-line fit of
``log10 F`` against ``log10 s`` whose slope is the scaling exponent alpha.

Reference values of alpha: 0.5 for uncorrelated noise, 1.5 for a Brownian
path, in between for long-range correlated series.

Scales can be normalized by a characteristic count ``A`` (e.g. average daily
number of events) so that ``s / A == 1`` marks one trading day; the three
default bands then cover intra-day, day and month horizons.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

# (lo, hi] bands on the normalized scale for alpha_1, alpha_2, alpha_3
DEFAULT_BANDS: dict[str, tuple[float, float]] = {
    "alpha1": (0.003, 0.1),
    "alpha2": (0.3, 3.0),
    "alpha3": (10.0, 100.0),
}
Z95 = 1.96


class DFAError(ValueError):
    pass


class EmptySeries(DFAError):
    pass


class ScaleTooLarge(DFAError):
    pass


class ScaleTooSmall(DFAError):
    pass


class InsufficientPoints(DFAError):
    pass


class ZeroFluctuationInRange(DFAError):
    pass


class MissingNormalization(DFAError):
    pass


class SeriesTooShort(DFAError):
    """Raised for a day too short to analyze; callers skip the day."""


class InsufficientData(DFAError):
    pass


@dataclass
class FluctuationCurve:
    scales: np.ndarray
    fluctuations: np.ndarray
    n_source: int
    normalization: float | None = None
    detrend_order: int = 1

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=np.int64)
        self.fluctuations = np.asarray(self.fluctuations, dtype=np.float64)
        if self.scales.shape != self.fluctuations.shape or self.scales.ndim != 1:
            raise ValueError("scales and fluctuations must be 1-D and equally long")
        if self.scales.size and np.any(np.diff(self.scales) <= 0):
            raise ValueError("scales must be strictly increasing")
        if self.scales.size and self.scales[0] < self.detrend_order + 2:
            raise ScaleTooSmall(f"min scale {self.scales[0]} < order + 2")
        if self.scales.size and self.scales[-1] * 4 > self.n_source:
            raise ScaleTooLarge(f"max scale {self.scales[-1]} > n_source / 4")
        if np.any(self.fluctuations < 0):
            raise ValueError("fluctuations must be nonnegative")
        if self.normalization is not None and not self.normalization > 0:
            raise ValueError("normalization must be positive")

    def __len__(self) -> int:
        return int(self.scales.size)

    @property
    def normalized_scales(self) -> np.ndarray:
        if self.normalization is None:
            raise MissingNormalization("curve has no normalization constant")
        return self.scales / self.normalization

    def with_normalization(self, normalization: float) -> "FluctuationCurve":
        return FluctuationCurve(self.scales, self.fluctuations, self.n_source,
                                float(normalization), self.detrend_order)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("scale,fluctuation\n")
        for s, f in zip(self.scales.tolist(), self.fluctuations.tolist()):
            buf.write(f"{s},{f:.12g}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "scales": self.scales.tolist(),
            "fluctuations": [float(f"{f:.12g}") for f in self.fluctuations.tolist()],
            "n_source": self.n_source,
            "normalization": self.normalization,
            "detrend_order": self.detrend_order,
        }


@dataclass
class ScalingFit:
    alpha: float
    intercept: float
    fit_range: tuple[float, float]
    r_squared: float
    n_points: int
    stderr_alpha: float
    normalized: bool = False

    @property
    def ci95_half_width(self) -> float:
        return Z95 * self.stderr_alpha

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_range"] = list(self.fit_range)
        return d


@dataclass
class AlphaSummary:
    mean: float
    std: float
    ci95_half_width: float
    n_days: int


@dataclass
class LocalAlphas:
    """Band fits keyed like :data:`DEFAULT_BANDS`; failed bands are None with a reason."""

    fits: dict[str, ScalingFit | None]
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def alpha1(self) -> ScalingFit | None:
        return self.fits.get("alpha1")

    @property
    def alpha2(self) -> ScalingFit | None:
        return self.fits.get("alpha2")

    @property
    def alpha3(self) -> ScalingFit | None:
        return self.fits.get("alpha3")


@dataclass(frozen=True)
class DFAConfig:
    order: int = 1
    s_min: int = 8
    per_decade: int = 20
    min_length: int = 64
    both_ends: bool = False
    fit_band: str = "full"  # or "intra": alpha_1 band, normalized by the day's length
    intra_band: tuple[float, float] = DEFAULT_BANDS["alpha1"]

    def __post_init__(self):
        if not 1 <= self.order <= 3:
            raise ValueError("detrend order must be 1, 2 or 3")
        if self.s_min < self.order + 2:
            raise ValueError("s_min must be at least order + 2")
        if self.per_decade < 1:
            raise ValueError("per_decade must be positive")
        if self.fit_band not in ("full", "intra"):
            raise ValueError("fit_band must be 'full' or 'intra'")
        lo, hi = self.intra_band
        if not 0 <= lo < hi:
            raise ValueError("intra band must satisfy 0 <= lo < hi")


def profile(series: Sequence[float] | np.ndarray) -> np.ndarray:
    """Cumulative sum of ``series - mean(series)``."""
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise EmptySeries("cannot profile an empty series")
    return np.cumsum(x - x.mean())


def scale_grid(n: int, s_min: int = 8, per_decade: int = 20, s_max: int | None = None) -> np.ndarray:
    """Log-spaced integer window sizes from ``s_min`` to ``s_max`` (default ``n // 4``).

    Roughly ``per_decade`` points per decade before integer rounding removes
    duplicates at the small end.
    """
    if s_max is None:
        s_max = n // 4
    if s_max < s_min:
        return np.empty(0, dtype=np.int64)
    decades = math.log10(s_max / s_min)
    num = max(int(math.ceil(decades * per_decade)) + 1, 2)
    grid = np.round(np.logspace(math.log10(s_min), math.log10(s_max), num)).astype(np.int64)
    grid[0], grid[-1] = s_min, s_max
    return np.unique(grid)


def _window_basis(s: int, order: int) -> np.ndarray:
    # orthonormal polynomial basis on the centered, rescaled window index
    u = (np.arange(s, dtype=np.float64) - (s - 1) / 2.0) / (s / 2.0)
    q, _ = np.linalg.qr(np.vander(u, order + 1, increasing=True))
    return q


def _mean_sq_residual(windows: np.ndarray, basis: np.ndarray) -> np.ndarray:
    # centering first keeps large profile levels out of the projection
    windows = windows - windows.mean(axis=1, keepdims=True)
    resid = windows - (windows @ basis) @ basis.T
    return np.einsum("ij,ij->i", resid, resid) / windows.shape[1]


def _check_scales(n: int, scales: np.ndarray, order: int) -> None:
    if n == 0:
        raise EmptySeries("empty series")
    if scales.size == 0:
        raise ValueError("no scales given")
    if np.any(np.diff(scales) <= 0):
        raise ValueError("scales must be strictly increasing")
    if scales[0] < order + 2:
        raise ScaleTooSmall(f"scale {scales[0]} < detrend order + 2 = {order + 2}")
    if 4 * scales[-1] > n:
        raise ScaleTooLarge(f"scale {scales[-1]} exceeds N/4 = {n / 4:g}")


def fluctuation(
    series: Sequence[float] | np.ndarray,
    scales: Sequence[int] | np.ndarray | None = None,
    detrend_order: int = 1,
    both_ends: bool = False,
) -> FluctuationCurve:
    """DFA fluctuation function ``F(s)`` for each window size in ``scales``.

    Windows are laid from the first sample; the ``N mod s`` trailing samples are
    dropped. With ``both_ends`` a second partition laid from the last sample is
    added, doubling the window count.

    Args:
        series: the raw series (not the profile).
        scales: strictly increasing window sizes; defaults to :func:`scale_grid`.
        detrend_order: polynomial degree removed in each window.
        both_ends: also partition from the end of the profile.

    Raises:
        EmptySeries, ScaleTooSmall, ScaleTooLarge
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n == 0:
        raise EmptySeries("empty series")
    scales = scale_grid(n, max(8, detrend_order + 2)) if scales is None else np.asarray(scales, dtype=np.int64)
    _check_scales(n, scales, detrend_order)
    y = profile(x)
    out = np.empty(scales.size, dtype=np.float64)
    for i, s in enumerate(scales.tolist()):
        m = n // s
        basis = _window_basis(s, detrend_order)
        f2 = _mean_sq_residual(y[: m * s].reshape(m, s), basis)
        if both_ends:
            f2 = np.concatenate([f2, _mean_sq_residual(y[n - m * s:].reshape(m, s), basis)])
        out[i] = math.sqrt(f2.mean())
    return FluctuationCurve(scales, out, n, None, detrend_order)


def fluctuation_reference(
    series: Sequence[float] | np.ndarray,
    scales: Iterable[int],
    detrend_order: int = 1,
    both_ends: bool = False,
) -> np.ndarray:
    """Slow window-by-window DFA used as an oracle for :func:`fluctuation`.

    Each window is fitted separately with ``numpy.linalg.lstsq`` on the raw
    index ``1..s`` and the residuals are summed in plain Python.
    """
    x = [float(v) for v in series]
    n = len(x)
    mean = sum(x) / n
    y, acc = [], 0.0
    for v in x:
        acc += v - mean
        y.append(acc)
    result = []
    for s in scales:
        idx = np.arange(1, s + 1, dtype=np.float64)
        design = np.vander(idx, detrend_order + 1)
        m = n // s
        starts = [k * s for k in range(m)]
        if both_ends:
            starts += [n - (k + 1) * s for k in range(m)]
        total = 0.0
        for start in starts:
            seg = np.array(y[start:start + s])
            coef = np.linalg.lstsq(design, seg, rcond=None)[0]
            resid = seg - design @ coef
            total += sum(r * r for r in resid.tolist()) / s
        result.append(math.sqrt(total / len(starts)))
    return np.array(result)


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    n = x.size
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    slope = float(dx @ dy) / sxx
    intercept = float(ym - slope * xm)
    resid = dy - slope * dx
    ssr = float(resid @ resid)
    sst = float(dy @ dy)
    r2 = 1.0 if sst == 0 else min(max(1.0 - ssr / sst, 0.0), 1.0)
    stderr = math.sqrt(ssr / (n - 2) / sxx) if n > 2 else 0.0
    return slope, intercept, r2, stderr


def fit_alpha(
    curve: FluctuationCurve,
    range: tuple[float, float] | None = None,
    normalized: bool = False,
) -> ScalingFit:
    """Least-squares slope of ``log10 F`` on ``log10 s`` over ``(lo, hi]``.

    With ``normalized`` the range is read on ``s / A``. ``range=None`` fits all
    samples. The intercept refers to the raw (un-normalized) base-10 scale.

    Raises:
        InsufficientPoints: fewer than two samples in range.
        ZeroFluctuationInRange: some ``F(s) == 0`` in range.
    """
    axis = curve.normalized_scales if normalized else curve.scales.astype(np.float64)
    if range is None:
        mask = np.ones(axis.size, dtype=bool)
        lo_hi = (float(axis[0]), float(axis[-1])) if axis.size else (math.nan, math.nan)
    else:
        lo, hi = range
        mask = (axis > lo) & (axis <= hi)
        lo_hi = (float(lo), float(hi))
    count = int(mask.sum())
    if count < 2:
        raise InsufficientPoints(f"{count} curve sample(s) in range {lo_hi}")
    f = curve.fluctuations[mask]
    if np.any(f <= 0):
        raise ZeroFluctuationInRange(f"zero fluctuation inside range {lo_hi}")
    x = np.log10(curve.scales[mask].astype(np.float64))
    slope, intercept, r2, stderr = _ols(x, np.log10(f))
    return ScalingFit(slope, intercept, lo_hi, r2, count, stderr, normalized)


def local_alphas(
    curve: FluctuationCurve,
    bands: dict[str, tuple[float, float]] | None = None,
) -> LocalAlphas:
    """Fit each normalized band separately; a band without enough samples is
    reported in ``errors`` and does not affect the others."""
    if curve.normalization is None:
        raise MissingNormalization("local alphas need the normalization constant")
    bands = DEFAULT_BANDS if bands is None else bands
    fits: dict[str, ScalingFit | None] = {}
    errors: dict[str, str] = {}
    for name, band in bands.items():
        try:
            fits[name] = fit_alpha(curve, band, normalized=True)
        except (InsufficientPoints, ZeroFluctuationInRange) as exc:
            fits[name] = None
            errors[name] = f"{type(exc).__name__}: {exc}"
    return LocalAlphas(fits, errors)


def series_curve(values: Sequence[float] | np.ndarray, config: DFAConfig = DFAConfig()) -> FluctuationCurve:
    """Fluctuation curve over the default log grid ``[s_min, N/4]``."""
    x = np.asarray(values, dtype=np.float64)
    scales = scale_grid(x.size, config.s_min, config.per_decade)
    if scales.size < 2:
        raise SeriesTooShort(f"series of length {x.size} gives fewer than two scales")
    return fluctuation(x, scales, config.order, config.both_ends)


def daily_alpha(series, config: DFAConfig = DFAConfig()) -> ScalingFit:
    """Scaling exponent of one day's duration series.

    Accepts a :class:`~lobfractal.durations.DurationSeries` or a plain array.
    Durations become floats only here.

    Raises:
        SeriesTooShort: fewer than ``config.min_length`` values.
    """
    values = getattr(series, "values", series)
    x = np.asarray(values, dtype=np.float64)
    if x.size < config.min_length:
        raise SeriesTooShort(f"{x.size} values < min_length {config.min_length}")
    curve = series_curve(x, config)
    if config.fit_band == "intra":
        return fit_alpha(curve.with_normalization(x.size), config.intra_band, normalized=True)
    return fit_alpha(curve)


def summarize_alphas(fits: Iterable[ScalingFit | float]) -> AlphaSummary:
    """Mean, sample std (n - 1) and 95% half-width ``1.96 std / sqrt(n)``."""
    alphas = np.array([f.alpha if isinstance(f, ScalingFit) else float(f) for f in fits])
    n = alphas.size
    if n < 2:
        raise InsufficientData(f"need at least two alphas, got {n}")
    mean = float(alphas.mean())
    std = float(alphas.std(ddof=1))
    return AlphaSummary(mean, std, Z95 * std / math.sqrt(n), n)


def fits_to_csv(fits: Sequence[ScalingFit]) -> str:
    buf = io.StringIO()
    buf.write("alpha,intercept,fit_lo,fit_hi,normalized,r_squared,n_points,stderr_alpha\n")
    for f in fits:
        buf.write(
            f"{f.alpha:.12g},{f.intercept:.12g},{f.fit_range[0]:.12g},{f.fit_range[1]:.12g},"
            f"{int(f.normalized)},{f.r_squared:.12g},{f.n_points},{f.stderr_alpha:.12g}\n"
        )
    return buf.getvalue()


def to_json(obj: FluctuationCurve | ScalingFit | Sequence[ScalingFit]) -> str:
    if isinstance(obj, (FluctuationCurve, ScalingFit)):
        payload = obj.to_dict()
    else:
        payload = [f.to_dict() for f in obj]
    return json.dumps(payload, indent=2, sort_keys=True)
