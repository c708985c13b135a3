"""Periodicity mining on binned encounter series.

Component ``k`` of an ``N``-sample series means "the pattern repeats ``k``
times over the window", so its period is ``N * bin_width / k``. Magnitudes
are unnormalized (no ``1/N``) and the mean is kept at ``k = 0``; DC is never
reported as a peak.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_nonnegative, check_positive, check_series
from .errors import InvalidComponent, SeriesTooShort
from .trace import BinnedSeries, EncounterTrace, bin_pair_series


@dataclass(frozen=True)
class Spectrum:
    magnitudes: np.ndarray
    phases: np.ndarray
    n: int
    bin_width: float

    @property
    def n_components(self):
        return len(self.magnitudes)


@dataclass(frozen=True)
class Peak:
    k: int
    magnitude: float
    phase: float


@dataclass(frozen=True)
class PeakPolicy:
    """Peak rule: strict local maximum at or above ``mean + c * std`` of non-DC magnitudes."""

    c: float = 2.0
    max_peaks: int = 4

    def __post_init__(self):
        check_nonnegative(self.c, "c")
        if int(self.max_peaks) != self.max_peaks or self.max_peaks < 1:
            raise ValueError(f"max_peaks must be a positive integer, got {self.max_peaks!r}")


@dataclass(frozen=True)
class PeriodicComponent:
    period: float
    magnitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period!r}")
        if not 0 < self.magnitude <= 1:
            raise ValueError(f"magnitude must lie in (0, 1], got {self.magnitude!r}")

    def to_dict(self):
        return {"period_s": self.period, "magnitude": self.magnitude, "phase": self.phase}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["period_s"]), float(d["magnitude"]), float(d.get("phase", 0.0)))


def _wrap_phase(phases):
    # np.angle gives [-pi, pi]; the convention here is (-pi, pi]
    phases = np.asarray(phases, dtype=float).copy()
    phases[phases <= -math.pi] = math.pi
    return phases


def direct_dft(x) -> np.ndarray:
    """Reference O(N^2) transform for the non-negative half of the spectrum."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    k = np.arange(n // 2 + 1)[:, None]
    t = np.arange(n)[None, :]
    # reduce k*t mod n before scaling so large N keeps full precision
    angle = -2.0 * np.pi * ((k * t) % n) / n
    return (np.cos(angle) + 1j * np.sin(angle)) @ x


def dft(series, method="fft", bin_width=None) -> Spectrum:
    """Magnitude/phase spectrum for ``k = 0 .. N // 2``.

    ``series`` is a :class:`BinnedSeries` or a plain sequence, in which case
    ``bin_width`` (default 1) gives the sample spacing. ``method="direct"``
    evaluates the O(N^2) sum instead of the FFT.
    """
    if isinstance(series, BinnedSeries):
        values, bin_width = series.values, series.bin_width
    else:
        values, bin_width = series, 1.0 if bin_width is None else bin_width
    x = check_series(values, min_length=0)
    if len(x) < 2:
        raise SeriesTooShort(f"need at least 2 samples, got {len(x)}")
    if method == "fft":
        coeffs = np.fft.rfft(x)
    elif method == "direct":
        coeffs = direct_dft(x)
    else:
        raise ValueError(f"unknown method {method!r}")
    return Spectrum(np.abs(coeffs), _wrap_phase(np.angle(coeffs)), len(x), float(bin_width))


def detect_peaks(spec: Spectrum, policy: PeakPolicy = PeakPolicy()) -> Tuple[Peak, ...]:
    mags = np.asarray(spec.magnitudes, dtype=float)
    non_dc = mags[1:]
    if non_dc.size == 0:
        return ()
    threshold = non_dc.mean() + policy.c * non_dc.std()
    padded = np.concatenate(([-np.inf], non_dc, [-np.inf]))
    is_max = (padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])
    ks = np.nonzero(is_max & (non_dc >= threshold))[0] + 1
    peaks = [Peak(int(k), float(mags[k]), float(spec.phases[k])) for k in ks]
    peaks.sort(key=lambda p: (-p.magnitude, p.k))
    return tuple(peaks[: int(policy.max_peaks)])


def to_periods(peaks: Sequence[Peak], n: int, bin_width) -> List[PeriodicComponent]:
    check_positive(bin_width, "bin_width")
    for p in peaks:
        if p.k < 1 or p.k > n // 2:
            raise InvalidComponent(f"component k={p.k} outside 1..{n // 2}")
    if not peaks:
        return []
    top = max(p.magnitude for p in peaks)
    return [PeriodicComponent(n * bin_width / p.k, p.magnitude / top, p.phase) for p in peaks]


def component_index(period, n, bin_width):
    """Fractional frequency index a period maps to for an ``n``-bin window."""
    return n * bin_width / period


def analyze_series(series: BinnedSeries, policy: PeakPolicy = PeakPolicy()):
    spec = dft(series)
    peaks = detect_peaks(spec, policy)
    return spec, peaks, to_periods(peaks, spec.n, spec.bin_width)


def analyze_trace(trace: EncounterTrace, bin_width, policy: PeakPolicy = PeakPolicy(), mode="indicator"):
    """Per-pair peak report, one JSON-ready dict per pair with encounters."""
    out = []
    for pair in trace.pairs():
        series = bin_pair_series(trace, pair, bin_width, mode)
        if len(series) < 2:
            out.append({"pair": list(pair), "n": len(series), "bin_width_s": bin_width, "peaks": []})
            continue
        spec, peaks, comps = analyze_series(series, policy)
        out.append(
            {
                "pair": list(pair),
                "n": spec.n,
                "bin_width_s": bin_width,
                "peaks": [
                    {"k": p.k, "period_s": c.period, "magnitude": c.magnitude, "phase": c.phase}
                    for p, c in zip(peaks, comps)
                ],
            }
        )
    return out


class PeriodicityAnalyzer(TransformerMixin, BaseEstimator):
    """Estimator wrapper: rows of ``X`` are binned series of equal length.

    ``fit`` finds peaks per row (``peaks_``, ``components_``); ``transform``
    maps each row to its magnitude spectrum, shape ``(n_rows, N // 2 + 1)``.

    Parameters
    ----------
    bin_width : float
        Seconds per sample, used to turn component indices into periods.
    c : float
        Threshold multiplier on the standard deviation of non-DC magnitudes.
    max_peaks : int
        Peaks kept per row.
    method : {"fft", "direct"}
    """

    def __init__(self, bin_width=86400.0, c=2.0, max_peaks=4, method="fft"):
        self.bin_width = bin_width
        self.c = c
        self.max_peaks = max_peaks
        self.method = method

    def _spectra(self, X):
        X = check_array(X, ensure_min_features=2)
        return [dft(row, self.method, self.bin_width) for row in X]

    def fit(self, X, y=None):
        check_positive(self.bin_width, "bin_width")
        policy = PeakPolicy(self.c, self.max_peaks)
        spectra = self._spectra(X)
        self.n_bins_ = spectra[0].n
        self.peaks_ = [detect_peaks(s, policy) for s in spectra]
        self.components_ = [to_periods(p, s.n, s.bin_width) for p, s in zip(self.peaks_, spectra)]
        return self

    def transform(self, X):
        check_is_fitted(self, "peaks_")
        spectra = self._spectra(X)
        if spectra[0].n != self.n_bins_:
            raise ValueError(f"expected series of length {self.n_bins_}, got {spectra[0].n}")
        return np.vstack([s.magnitudes for s in spectra])

    def dominant_periods(self):
        """Period of the strongest peak per fitted row (``nan`` when none)."""
        check_is_fitted(self, "components_")
        return np.array([c[0].period if c else np.nan for c in self.components_])
