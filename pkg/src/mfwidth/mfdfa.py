"""Multifractal detrended fluctuation analysis, from samples to spectral width.

The pipeline is split into small pure functions so each stage can be checked
in isolation:

    compute_profile -> segment_bounds / segment_variances
    -> qth_order_fluctuation (fluctuation_surface) -> fit_hurst
    -> tau_from_hurst / singularity_spectrum -> fit_quadratic_width

:func:`mfdfa` chains them.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from ._validation import (
    check_order,
    check_q_grid,
    check_scales,
    check_segmentation,
    check_signal,
)

logger = logging.getLogger(__name__)

DEFAULT_MIN_SCALE = 16
DEFAULT_N_SCALES = 20
DEFAULT_Q = np.arange(-20, 21) * 0.25
DEFAULT_VARIANCE_FLOOR = 1e-30
# fraction of floored segments at one scale above which a warning is raised
FLOOR_WARN_FRACTION = 0.01
MONOFRACTAL_TOL = 1e-6


class DegenerateVarianceError(ValueError):
    """All detrended segment variances at some scale vanish."""


class SpectrumError(ValueError):
    """The quadratic fit of the singularity spectrum has no real width."""


@dataclass(frozen=True)
class Signal:
    """A finite sample sequence and its sample rate in Hz."""

    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "samples", check_signal(self.samples))
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class MfdfaConfig:
    """Analysis knobs.

    ``scales=None`` means :func:`default_scales` for the analyzed length.
    ``fit_threshold`` restricts the quadratic fit to spectrum points with
    ``f >= fit_threshold``; ``None`` uses every point.
    """

    scales: Optional[tuple] = None
    q_grid: tuple = tuple(DEFAULT_Q.tolist())
    detrend_order: int = 1
    segmentation: str = "both-ends"
    variance_floor: float = DEFAULT_VARIANCE_FLOOR
    fit_threshold: Optional[float] = None

    def __post_init__(self):
        order = check_order(self.detrend_order)
        object.__setattr__(self, "detrend_order", order)
        if self.scales is not None:
            object.__setattr__(self, "scales", tuple(int(s) for s in check_scales(self.scales, order)))
        object.__setattr__(self, "q_grid", tuple(float(q) for q in check_q_grid(self.q_grid)))
        check_segmentation(self.segmentation)
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")

    def resolve_scales(self, n: int) -> np.ndarray:
        scales = default_scales(n) if self.scales is None else np.asarray(self.scales, dtype=np.int64)
        if scales[-1] > n // 4:
            raise ValueError(f"largest scale {scales[-1]} exceeds N/4 = {n // 4} for N = {n}")
        return check_scales(scales, self.detrend_order)


@dataclass
class FluctuationSurface:
    scales: np.ndarray
    q_grid: np.ndarray
    values: np.ndarray  # shape (n_q, n_scales)
    segment_counts: np.ndarray
    floored_counts: np.ndarray


@dataclass
class HurstCurve:
    q_grid: np.ndarray
    h: np.ndarray
    intercepts: np.ndarray
    r_squared: np.ndarray


@dataclass
class ScalingExponents:
    q_grid: np.ndarray
    tau: np.ndarray


@dataclass
class SingularitySpectrum:
    alpha: np.ndarray
    f_alpha: np.ndarray
    alpha0: float
    coeff_A: float
    coeff_B: float
    coeff_C: float
    width: float
    alpha1: float
    alpha2: float


@dataclass
class MfdfaResult:
    """Everything :func:`mfdfa` computes, kept for inspection and export."""

    config: MfdfaConfig
    scales: np.ndarray
    surface: FluctuationSurface
    hurst: HurstCurve
    tau: ScalingExponents
    spectrum: SingularitySpectrum
    warnings: list = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.spectrum.width


def default_scales(n: int, smin: int = DEFAULT_MIN_SCALE, count: int = DEFAULT_N_SCALES) -> np.ndarray:
    """Log-spaced integer scales from ``smin`` to ``n // 4``, deduplicated."""
    smax = n // 4
    if smax < smin:
        raise ValueError(f"signal of length {n} too short for a minimum scale of {smin}")
    return np.unique(np.round(np.geomspace(smin, smax, count)).astype(np.int64))


def compute_profile(signal) -> np.ndarray:
    """Cumulative sum of the mean-removed signal."""
    x = check_signal(signal)
    return np.cumsum(x - x.mean())


def segment_bounds(n: int, s: int, mode: str = "both-ends") -> list[tuple[int, int]]:
    """Half-open index ranges of the non-overlapping segments of size ``s``.

    ``both-ends`` appends the same number of segments laid from the end of
    the series, so the tail left over by the forward pass is also covered.
    """
    check_segmentation(mode)
    if s < 1:
        raise ValueError("scale must be at least 1")
    if s > n:
        raise ValueError(f"scale exceeds signal: s={s} > N={n}")
    n_seg = n // s
    bounds = [(v * s, (v + 1) * s) for v in range(n_seg)]
    if mode == "both-ends":
        offset = n - n_seg * s
        bounds += [(offset + v * s, offset + (v + 1) * s) for v in range(n_seg)]
    return bounds


@lru_cache(maxsize=128)
def _poly_basis(s: int, order: int) -> np.ndarray:
    # orthonormal columns spanning polynomials of degree <= order on s points
    x = np.linspace(-1.0, 1.0, s)
    q, _ = np.linalg.qr(np.vander(x, order + 1, increasing=True))
    q.setflags(write=False)
    return q


def _residual_power(blocks: np.ndarray, order: int) -> np.ndarray:
    s = blocks.shape[1]
    if s < order + 2:
        raise ValueError(f"segment of length {s} too short for detrend order {order}")
    basis = _poly_basis(s, order)
    resid = blocks - (blocks @ basis) @ basis.T
    return np.einsum("ij,ij->i", resid, resid) / s


def local_fluctuation(profile, bounds: tuple[int, int], order: int = 1) -> float:
    """Mean squared residual of a least-squares polynomial fit over one segment."""
    lo, hi = bounds
    seg = np.asarray(profile, dtype=np.float64)[lo:hi]
    return float(_residual_power(seg[None, :], check_order(order))[0])


def segment_variances(profile, s: int, order: int = 1, mode: str = "both-ends") -> np.ndarray:
    """Detrended variance of every segment, in :func:`segment_bounds` order."""
    y = np.asarray(profile, dtype=np.float64)
    n = y.size
    segment_bounds(n, s, mode)  # validation only
    n_seg = n // s
    parts = [y[: n_seg * s].reshape(n_seg, s)]
    if mode == "both-ends":
        parts.append(y[n - n_seg * s :].reshape(n_seg, s))
    return np.concatenate([_residual_power(p, order) for p in parts])


def qth_order_fluctuation(variances, q: float) -> float:
    """q-th order power mean of the segment fluctuations.

    ``q == 0`` uses the geometric-mean limit. Evaluated in log space so large
    ``|q|`` does not overflow.
    """
    f2 = np.asarray(variances, dtype=np.float64)
    if f2.size == 0:
        raise ValueError("no segment variances")
    if np.any(f2 <= 0) or not np.all(np.isfinite(f2)):
        raise DegenerateVarianceError("degenerate segment variance")
    log_f2 = np.log(f2)
    if q == 0:
        return float(np.exp(0.5 * log_f2.mean()))
    return float(np.exp((logsumexp(0.5 * q * log_f2) - np.log(f2.size)) / q))


def _surface_column(profile, s, order, mode, q_grid, floor):
    f2 = segment_variances(profile, s, order, mode)
    small = f2 < floor
    if small.all():
        raise DegenerateVarianceError(f"degenerate segment variance: all segments vanish at scale {s}")
    n_floored = int(small.sum())
    f2 = np.where(small, floor, f2)
    column = np.array([qth_order_fluctuation(f2, q) for q in q_grid])
    return column, f2.size, n_floored


def fluctuation_surface(
    profile,
    scales: Sequence[int],
    q_grid: Sequence[float],
    order: int = 1,
    mode: str = "both-ends",
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    n_jobs: int = 1,
) -> FluctuationSurface:
    """Evaluate F_q(s) on the full (q, s) grid.

    Scales are independent, so ``n_jobs > 1`` evaluates them on a thread pool;
    results do not depend on the worker count.
    """
    order = check_order(order)
    scales = check_scales(scales, order)
    q_grid = check_q_grid(q_grid)
    y = np.asarray(profile, dtype=np.float64)

    def work(s):
        return _surface_column(y, int(s), order, mode, q_grid, variance_floor)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            columns = list(pool.map(work, scales))
    else:
        columns = [work(s) for s in scales]

    return FluctuationSurface(
        scales=scales,
        q_grid=q_grid,
        values=np.column_stack([c[0] for c in columns]),
        segment_counts=np.array([c[1] for c in columns]),
        floored_counts=np.array([c[2] for c in columns]),
    )


def fit_hurst(surface: FluctuationSurface) -> HurstCurve:
    """Least-squares slope of log F_q(s) against log s, per q."""
    if len(surface.scales) < 3:
        raise ValueError("need at least 3 scales to fit h(q)")
    values = np.asarray(surface.values, dtype=np.float64)
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise ValueError("fluctuation function must be finite and positive to take logs")
    log_s = np.log(np.asarray(surface.scales, dtype=np.float64))
    log_f = np.log(values).T  # (n_scales, n_q)
    design = np.column_stack([log_s, np.ones_like(log_s)])
    coef, *_ = np.linalg.lstsq(design, log_f, rcond=None)
    resid = log_f - design @ coef
    ss_res = np.sum(resid**2, axis=0)
    ss_tot = np.sum((log_f - log_f.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, 1.0)
    return HurstCurve(
        q_grid=np.asarray(surface.q_grid, dtype=np.float64),
        h=coef[0],
        intercepts=coef[1],
        r_squared=np.clip(r2, 0.0, 1.0),
    )


def tau_from_hurst(curve: HurstCurve) -> ScalingExponents:
    q = np.asarray(curve.q_grid, dtype=np.float64)
    return ScalingExponents(q_grid=q, tau=q * np.asarray(curve.h) - 1.0)


def singularity_spectrum(curve: HurstCurve) -> tuple[np.ndarray, np.ndarray]:
    """Singularity strengths and dimensions from h(q).

    h'(q) is taken by central differences, one-sided at the grid ends.
    """
    q = np.asarray(curve.q_grid, dtype=np.float64)
    h = np.asarray(curve.h, dtype=np.float64)
    if q.size < 3:
        raise ValueError("need at least 3 q values for the singularity spectrum")
    dh = np.gradient(h, q, edge_order=1)
    alpha = h + q * dh
    f_alpha = q * (alpha - h) + 1.0
    return alpha, f_alpha


def _peak_index(f_alpha, q_grid):
    f = np.asarray(f_alpha)
    ties = np.flatnonzero(f == f.max())
    if q_grid is None or ties.size == 1:
        return int(ties[0])
    return int(ties[np.argmin(np.abs(np.asarray(q_grid)[ties]))])


def fit_quadratic_width(
    alpha,
    f_alpha,
    q_grid=None,
    fit_threshold: Optional[float] = None,
) -> SingularitySpectrum:
    """Fit ``f = A u^2 + B u + C`` with ``u = alpha - alpha0`` and take the
    distance between its zero crossings as the spectral width.

    ``alpha0`` is the strength at the largest observed ``f``; ties go to the
    point whose q is closest to zero when ``q_grid`` is given. A spectrum
    whose points are all at one strength (spread below 1e-6) is reported as
    monofractal with width 0.

    Raises:
        SpectrumError: the fit is not concave or has no real roots.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    f_alpha = np.asarray(f_alpha, dtype=np.float64)
    if alpha.shape != f_alpha.shape or alpha.ndim != 1:
        raise ValueError("alpha and f_alpha must be 1-D arrays of equal length")
    i0 = _peak_index(f_alpha, q_grid)
    alpha0 = float(alpha[i0])

    if np.ptp(alpha) < MONOFRACTAL_TOL:
        c = float(f_alpha.mean())
        return SingularitySpectrum(alpha, f_alpha, alpha0, 0.0, 0.0, c, 0.0, alpha0, alpha0)

    mask = np.ones(alpha.size, dtype=bool) if fit_threshold is None else f_alpha >= fit_threshold
    u = alpha[mask] - alpha0
    if np.unique(u).size < 3:
        raise SpectrumError("spectrum not concave / width undefined: fewer than 3 distinct points to fit")
    design = np.column_stack([u**2, u, np.ones_like(u)])
    (a, b, c), *_ = np.linalg.lstsq(design, f_alpha[mask], rcond=None)
    if abs(a) < MONOFRACTAL_TOL and np.ptp(u) < MONOFRACTAL_TOL:
        return SingularitySpectrum(alpha, f_alpha, alpha0, float(a), float(b), float(c), 0.0, alpha0, alpha0)
    disc = b * b - 4.0 * a * c
    if a >= 0 or disc < 0:
        raise SpectrumError(f"spectrum not concave / width undefined (A={a:.4g}, discriminant={disc:.4g})")
    root = np.sqrt(disc)
    u1, u2 = (-b - root) / (2 * a), (-b + root) / (2 * a)  # a < 0 so u1 > u2
    return SingularitySpectrum(
        alpha=alpha,
        f_alpha=f_alpha,
        alpha0=alpha0,
        coeff_A=float(a),
        coeff_B=float(b),
        coeff_C=float(c),
        width=float(root / -a),
        alpha1=float(alpha0 + u1),
        alpha2=float(alpha0 + u2),
    )


def mfdfa(signal, config: Optional[MfdfaConfig] = None, n_jobs: int = 1) -> MfdfaResult:
    """Run the whole analysis on one signal.

    Args:
        signal: 1-D samples or a :class:`Signal`.
        config: analysis settings; defaults to :class:`MfdfaConfig()`.
        n_jobs: threads used across scales. Output is identical for any value.

    Returns:
        MfdfaResult with the fluctuation surface, h(q), tau(q), and the
        fitted spectrum. ``warnings`` lists scales where more than 1% of
        segments hit the variance floor.
    """
    config = config or MfdfaConfig()
    x = check_signal(signal)
    scales = config.resolve_scales(x.size)
    if x.size < 4 * scales[-1]:
        raise ValueError(f"signal length {x.size} is below 4 x largest scale ({scales[-1]})")

    surface = fluctuation_surface(
        compute_profile(x),
        scales,
        config.q_grid,
        order=config.detrend_order,
        mode=config.segmentation,
        variance_floor=config.variance_floor,
        n_jobs=n_jobs,
    )
    warnings = []
    for s, n_seg, n_low in zip(surface.scales, surface.segment_counts, surface.floored_counts):
        if n_low > FLOOR_WARN_FRACTION * n_seg:
            warnings.append(f"variance-floor: {n_low}/{n_seg} segments floored at scale {s}")
    if warnings:
        logger.warning("%d scale(s) with floored segment variances", len(warnings))

    curve = fit_hurst(surface)
    alpha, f_alpha = singularity_spectrum(curve)
    spectrum = fit_quadratic_width(alpha, f_alpha, curve.q_grid, config.fit_threshold)
    return MfdfaResult(
        config=config,
        scales=scales,
        surface=surface,
        hurst=curve,
        tau=tau_from_hurst(curve),
        spectrum=spectrum,
        warnings=warnings,
    )


def shuffle_surrogate(signal, seed: int):
    """Uniformly random permutation of the samples, fixed by ``seed``.

    Returns the same type as the input (:class:`Signal` or array).
    """
    rng = np.random.default_rng(seed)
    if isinstance(signal, Signal):
        return Signal(rng.permutation(signal.samples), signal.sample_rate)
    return rng.permutation(check_signal(signal, min_length=0))
