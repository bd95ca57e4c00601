"""Analytic signals, instantaneous attributes, and empirical mode decomposition.

A signal is split into intrinsic mode functions (IMFs) by iterative sifting:
fit cubic-spline envelopes through the maxima and minima, subtract the envelope
mean, and repeat until the result is close enough to a zero-mean oscillation.
The leftover non-oscillatory residual is the trend.  Each IMF is narrow-band
enough that its Hilbert-transform phase yields a meaningful instantaneous
frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    DegenerateSignal,
    NoConvergence,
    NonFiniteSample,
    SignalTooShort,
    TooFewExtrema,
)

__all__ = [
    "TimeSeries",
    "AnalyticSignal",
    "InstantAttributes",
    "EnvelopePair",
    "Decomposition",
    "ImfReport",
    "analytic_signal",
    "instantaneous_attributes",
    "find_extrema",
    "envelope_pair",
    "sift",
    "imf_check",
    "emd",
    "decomposition_to_dict",
    "decomposition_from_dict",
]


@dataclass
class TimeSeries:
    """A uniformly sampled real-valued signal.

    ``samples`` keeps whatever unit the source uses (degrees for joint
    angles, normalized amplitude for audio).  ``rate`` is in samples per
    second.
    """

    samples: np.ndarray
    rate: float
    start_time: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.samples.size < 2:
            raise SignalTooShort("a time series needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteSample("samples contain NaN or Inf")
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        """Clip length in seconds (sample count over rate)."""
        return self.samples.size / self.rate

    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.rate


@dataclass
class AnalyticSignal:
    """Real signal plus its Hilbert-transform quadrature component."""

    real_part: np.ndarray
    imag_part: np.ndarray
    rate: float

    def __post_init__(self):
        self.real_part = np.asarray(self.real_part, dtype=np.float64)
        self.imag_part = np.asarray(self.imag_part, dtype=np.float64)
        if self.real_part.shape != self.imag_part.shape:
            raise ValueError("real and imaginary parts must have equal length")


@dataclass
class InstantAttributes:
    """Instantaneous amplitude (>= 0) and frequency in Hz, per sample."""

    amplitude: np.ndarray
    frequency: np.ndarray


@dataclass
class EnvelopePair:
    """Upper and lower extrema envelopes evaluated on the sample grid."""

    upper: np.ndarray
    lower: np.ndarray


@dataclass
class ImfReport:
    """Outcome of checking a candidate signal against the IMF criteria."""

    extrema_count: int
    zero_crossings: int
    count_ok: bool
    mean_env_rms: float
    mean_ok: bool


@dataclass
class Decomposition:
    """Ordered IMFs (index 0 = highest frequency) plus the residual trend."""

    imfs: list
    trend: np.ndarray
    rate: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.imfs = [np.asarray(c, dtype=np.float64) for c in self.imfs]
        self.trend = np.asarray(self.trend, dtype=np.float64)
        n = self.trend.size
        if any(c.size != n for c in self.imfs):
            raise ValueError("all member series must share one length")

    @property
    def imf_count(self) -> int:
        return len(self.imfs)

    def reconstruct(self) -> np.ndarray:
        """Sum of all IMFs plus the trend."""
        total = self.trend.copy()
        for c in self.imfs:
            total += c
        return total


# ---------------------------------------------------------------------------
# analytic signal and instantaneous attributes


def analytic_signal(x: TimeSeries) -> AnalyticSignal:
    """Build the analytic signal of ``x`` by the frequency-domain method.

    Negative frequencies are zeroed, positive frequencies doubled, and the
    DC / Nyquist bins kept unscaled.  For band-limited discrete signals this
    equals the principal-value convolution of ``x`` with 1/(pi*t).
    """
    s = x.samples
    n = s.size
    if n < 4:
        raise SignalTooShort("analytic signal needs at least 4 samples")
    spectrum = np.fft.fft(s)
    gain = np.zeros(n)
    gain[0] = 1.0
    if n % 2 == 0:
        gain[1 : n // 2] = 2.0
        gain[n // 2] = 1.0
    else:
        gain[1 : (n + 1) // 2] = 2.0
    z = np.fft.ifft(spectrum * gain)
    return AnalyticSignal(real_part=s.copy(), imag_part=z.imag, rate=x.rate)


def instantaneous_attributes(z: AnalyticSignal) -> InstantAttributes:
    """Per-sample amplitude and frequency of an analytic signal.

    The amplitude is the complex magnitude; the frequency is the derivative
    of the unwrapped phase (central differences, one-sided at the ends)
    divided by 2*pi, in Hz.  Raises :class:`DegenerateSignal` when the
    amplitude is negligible over most of the signal, since the phase carries
    no information there.
    """
    amp = np.hypot(z.real_part, z.imag_part)
    if np.mean(amp < 1e-12) > 0.5:
        raise DegenerateSignal("amplitude is near zero over most samples")
    phase = np.unwrap(np.arctan2(z.imag_part, z.real_part))
    freq = np.gradient(phase) * z.rate / (2.0 * np.pi)
    return InstantAttributes(amplitude=amp, frequency=freq)


# ---------------------------------------------------------------------------
# extrema and envelopes


def _extrema(s: np.ndarray):
    """Indices of strict local maxima and minima.

    Plateaus count once, reported at their (floored) midpoint.  Endpoints are
    never reported.
    """
    n = s.size
    if n < 3:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    change = np.flatnonzero(np.diff(s) != 0)
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [n - 1]))
    vals = s[starts]
    if vals.size < 3:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    prev = vals[:-2]
    cur = vals[1:-1]
    nxt = vals[2:]
    mids = (starts[1:-1] + ends[1:-1]) // 2
    maxima = mids[(cur > prev) & (cur > nxt)]
    minima = mids[(cur < prev) & (cur < nxt)]
    return maxima.astype(np.int64), minima.astype(np.int64)


def find_extrema(x: TimeSeries):
    """Return (maxima indices, minima indices) of ``x``."""
    return _extrema(x.samples)


def _mirrored_knots(idx: np.ndarray, values: np.ndarray, n: int):
    """Extend extrema by reflecting the two nearest each end across the boundary."""
    left_x = np.array([-idx[1], -idx[0]], dtype=np.float64)
    left_y = np.array([values[1], values[0]])
    last = n - 1
    right_x = np.array([2 * last - idx[-1], 2 * last - idx[-2]], dtype=np.float64)
    right_y = np.array([values[-1], values[-2]])
    knots_x = np.concatenate((left_x, idx.astype(np.float64), right_x))
    knots_y = np.concatenate((left_y, values, right_y))
    return knots_x, knots_y


def _spline_through(idx: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    knots_x, knots_y = _mirrored_knots(idx, values, n)
    spline = CubicSpline(knots_x, knots_y, bc_type="natural")
    return spline(np.arange(n, dtype=np.float64))


def _envelopes(s: np.ndarray):
    maxima, minima = _extrema(s)
    if maxima.size < 2 or minima.size < 2:
        raise TooFewExtrema(
            f"need >= 2 maxima and >= 2 minima, found {maxima.size}/{minima.size}"
        )
    n = s.size
    upper = _spline_through(maxima, s[maxima], n)
    lower = _spline_through(minima, s[minima], n)
    return upper, lower


def envelope_pair(x: TimeSeries) -> EnvelopePair:
    """Natural cubic-spline envelopes through the maxima and minima of ``x``.

    Boundaries are handled by mirror extension: the two extrema nearest each
    end are reflected across the signal boundary before fitting, and the
    splines are evaluated only on the original domain.
    """
    upper, lower = _envelopes(x.samples)
    return EnvelopePair(upper=upper, lower=lower)


def sift(c: TimeSeries) -> TimeSeries:
    """One sifting step: subtract the mean of the upper and lower envelopes."""
    upper, lower = _envelopes(c.samples)
    sifted = c.samples - 0.5 * (upper + lower)
    return TimeSeries(sifted, rate=c.rate, start_time=c.start_time)


# ---------------------------------------------------------------------------
# IMF criteria


def _zero_crossings(s: np.ndarray) -> int:
    nonzero = s[s != 0.0]
    if nonzero.size < 2:
        return 0
    return int(np.count_nonzero(np.signbit(nonzero[:-1]) != np.signbit(nonzero[1:])))


def _rms(s: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(s))))


def _counts_ok(s: np.ndarray) -> bool:
    maxima, minima = _extrema(s)
    return abs((maxima.size + minima.size) - _zero_crossings(s)) <= 1


def imf_check(c: TimeSeries, mean_env_tol: float = 0.1) -> ImfReport:
    """Check ``c`` against the two IMF criteria.

    ``count_ok`` holds when the number of extrema and zero crossings differ
    by at most one.  ``mean_ok`` holds when the RMS of the envelope mean over
    the well-supported span (first to last extremum) is at most
    ``mean_env_tol`` times the RMS of ``c``.  When there are too few extrema
    to fit envelopes, the signal mean stands in for the envelope mean.
    """
    s = c.samples
    maxima, minima = _extrema(s)
    extrema_count = int(maxima.size + minima.size)
    crossings = _zero_crossings(s)
    count_ok = abs(extrema_count - crossings) <= 1

    try:
        upper, lower = _envelopes(s)
        all_idx = np.sort(np.concatenate((maxima, minima)))
        lo, hi = int(all_idx[0]), int(all_idx[-1]) + 1
        mean_env_rms = _rms(0.5 * (upper[lo:hi] + lower[lo:hi]))
    except TooFewExtrema:
        mean_env_rms = abs(float(np.mean(s)))

    mean_ok = mean_env_rms <= mean_env_tol * _rms(s)
    return ImfReport(
        extrema_count=extrema_count,
        zero_crossings=crossings,
        count_ok=count_ok,
        mean_env_rms=mean_env_rms,
        mean_ok=mean_ok,
    )


# ---------------------------------------------------------------------------
# empirical mode decomposition


def _sd(c_old: np.ndarray, c_new: np.ndarray) -> float:
    """Normalized squared change between sift iterates.

    Squared change summed over samples, normalized by the summed squared old
    iterate.  (Normalizing per sample blows up near zero crossings and never
    settles on broadband signals.)
    """
    denom = float(np.sum(np.square(c_old)))
    if denom == 0.0:
        return 0.0
    diff = c_old - c_new
    return float(np.sum(np.square(diff)) / denom)


# sift-internal envelope-mean tolerance, tighter than the 0.1 used by
# imf_check so accepted IMFs clear the published criterion with margin
_SIFT_MEAN_TOL = 0.05


def _extract_imf(residual: np.ndarray, sd_threshold: float, max_sifts: int):
    """Sift one IMF out of ``residual``.

    A candidate is accepted once the iterate-to-iterate change (SD) is below
    ``sd_threshold`` and the candidate itself satisfies the mode criteria:
    extrema/zero-crossing counts within one, envelope mean small relative to
    the candidate RMS.  Returns ``(imf, converged)``; ``imf`` is None when
    the residual cannot be enveloped at all and should be treated as trend.
    """
    c = residual.copy()
    sd = np.inf
    for iteration in range(max_sifts):
        try:
            upper, lower = _envelopes(c)
        except TooFewExtrema:
            if iteration == 0:
                return None, True
            return c, True
        mean_env = 0.5 * (upper + lower)
        if iteration > 0 and sd < sd_threshold and _counts_ok(c):
            maxima, minima = _extrema(c)
            lo = int(min(maxima[0], minima[0]))
            hi = int(max(maxima[-1], minima[-1])) + 1
            if _rms(mean_env[lo:hi]) <= _SIFT_MEAN_TOL * _rms(c):
                return c, True
        c_new = c - mean_env
        sd = _sd(c, c_new)
        c = c_new
    return c, sd <= 10.0 * sd_threshold


def emd(
    x: TimeSeries,
    sd_threshold: float = 0.25,
    max_sifts: int = 100,
    max_imfs: int = 16,
) -> Decomposition:
    """Decompose ``x`` into IMFs plus a trend by iterative sifting.

    The inner loop sifts until the normalized squared change between
    iterates drops below ``sd_threshold`` (conventionally 0.2-0.3) and the
    result satisfies the extrema/zero-crossing criterion.  The outer loop
    stops when the residual has fewer than 3 extrema or ``max_imfs`` is
    reached; the remaining residual is the trend.  Reconstruction is exact
    by construction up to float rounding.
    """
    if len(x) < 4:
        raise SignalTooShort("decomposition needs at least 4 samples")
    if not 0.0 < sd_threshold < 1.0:
        raise ValueError("sd_threshold must lie in (0, 1)")

    residual = x.samples.copy()
    scale = np.max(np.abs(residual))
    imfs = []
    for _ in range(max_imfs):
        # machine-precision dust produces spurious extrema; stop before
        # trying to sift it
        if np.max(np.abs(residual)) < 1e-10 * scale:
            break
        maxima, minima = _extrema(residual)
        if maxima.size + minima.size < 3:
            break
        imf, converged = _extract_imf(residual, sd_threshold, max_sifts)
        if imf is None:
            break
        if not converged:
            raise NoConvergence(
                f"sifting did not settle within {max_sifts} iterations"
            )
        imfs.append(imf)
        residual = residual - imf

    meta = {
        "source": "emd",
        "sd_threshold": sd_threshold,
        "max_sifts": max_sifts,
        "max_imfs": max_imfs,
        "noise_pct": None,
        "noise_channels": None,
        "seed": None,
    }
    return Decomposition(imfs=imfs, trend=residual, rate=x.rate, meta=meta)


# ---------------------------------------------------------------------------
# JSON archive


def decomposition_to_dict(d: Decomposition) -> dict:
    """Plain-JSON form of a decomposition: {rate, sd_threshold, imfs, trend, meta}."""
    return {
        "rate": float(d.rate),
        "sd_threshold": d.meta.get("sd_threshold"),
        "imfs": [c.tolist() for c in d.imfs],
        "trend": d.trend.tolist(),
        "meta": dict(d.meta),
    }


def decomposition_from_dict(obj: dict) -> Decomposition:
    meta = dict(obj.get("meta") or {})
    if "sd_threshold" not in meta:
        meta["sd_threshold"] = obj.get("sd_threshold")
    return Decomposition(
        imfs=[np.asarray(c, dtype=np.float64) for c in obj["imfs"]],
        trend=np.asarray(obj["trend"], dtype=np.float64),
        rate=float(obj["rate"]),
        meta=meta,
    )
