"""Waveform container and spectral/power analysis.

Harmonics are extracted by synchronous correlation at a known fundamental over
an integer number of periods, so no window is applied and no leakage occurs.
The FFT path (:func:`full_spectrum`) exists for plotting only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

#: Default harmonic ceiling for THD (2 kHz at 50 Hz, the usual grid-code band).
DEFAULT_H_MAX = 40

_PERIOD_TOL = 1e-6


class AnalysisError(ValueError):
    """Raised when a waveform or spectrum violates an analysis precondition."""


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled real waveform.

    Parameters
    ----------
    samples : array_like
        Sample values (V or A).
    dt : float
        Sample period in seconds.
    t0 : float
        Time of the first sample in seconds.
    """

    samples: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        if not self.dt > 0:
            raise AnalysisError(f"dt must be positive, got {self.dt}")
        if x.ndim != 1 or x.size == 0:
            raise AnalysisError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(x)):
            raise AnalysisError("samples must be finite")

    def __len__(self):
        return self.samples.size

    @property
    def span(self) -> float:
        """Window length ``N*dt`` in seconds."""
        return self.samples.size * self.dt

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.size)

    def __eq__(self, other):
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (self.dt == other.dt and self.t0 == other.t0
                and np.array_equal(self.samples, other.samples))


@dataclass(frozen=True)
class Spectrum:
    """Peak amplitudes and phases of harmonics ``h = 0..h_max`` of ``f0``.

    Index 0 is the DC mean. Phases follow ``x(t) = sum A_h cos(h w0 t + phi_h)``.
    """

    f0: float
    amplitudes: np.ndarray
    phases: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=float)
        p = np.zeros_like(a) if self.phases is None else np.asarray(self.phases, dtype=float)
        if not self.f0 > 0:
            raise AnalysisError("f0 must be positive")
        if a.shape != p.shape or a.ndim != 1:
            raise AnalysisError("amplitudes and phases must be equal-length 1-D")
        if np.any(a < 0):
            raise AnalysisError("amplitudes must be non-negative")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "phases", p)

    @property
    def h_max(self) -> int:
        return self.amplitudes.size - 1


@dataclass(frozen=True)
class FrequencyTable:
    """One-sided FFT magnitude table (peak amplitudes) on the bin grid ``1/(N*dt)``."""

    freqs: np.ndarray
    magnitudes: np.ndarray
    n_samples: int

    def bin_power(self) -> np.ndarray:
        """Mean-square contribution of each bin; sums to the signal's mean square."""
        p = self.magnitudes ** 2 / 2.0
        p[0] = self.magnitudes[0] ** 2
        if self.n_samples % 2 == 0:
            p[-1] = self.magnitudes[-1] ** 2
        return p


def rms(ts: TimeSeries) -> float:
    """Root mean square of the samples."""
    return float(np.sqrt(np.mean(np.square(ts.samples))))


def periods_in(ts: TimeSeries, f0: float) -> int:
    """Number of whole fundamental periods spanned by ``ts``.

    Raises :class:`AnalysisError` if the span is not an integer multiple.
    """
    cycles = ts.span * f0
    whole = round(cycles)
    if whole < 1 or abs(cycles - whole) >= _PERIOD_TOL:
        raise AnalysisError(
            f"window of {ts.span:g} s spans {cycles:.9g} periods of {f0:g} Hz; "
            "an integer number >= 1 is required")
    return int(whole)


def harmonic_amplitudes(ts: TimeSeries, f0: float, h_max: int = DEFAULT_H_MAX) -> Spectrum:
    """Amplitude and phase of harmonics ``0..h_max`` by single-bin projection.

    Each harmonic ``h`` is correlated against ``exp(-j*2*pi*h*f0*t)`` over the
    whole window. The window must cover an integer number of periods.
    """
    if h_max < 1:
        raise AnalysisError("h_max must be >= 1")
    periods_in(ts, f0)
    if h_max * f0 >= 0.5 / ts.dt:
        raise AnalysisError(
            f"harmonic {h_max} at {h_max * f0:g} Hz is above Nyquist {0.5 / ts.dt:g} Hz")
    x = ts.samples
    t = ts.t
    per_period = 1.0 / (f0 * ts.dt)
    m = round(per_period)
    if abs(per_period - m) < 1e-9 * per_period and x.size % m == 0:
        # every basis function repeats each period: sum the periods first
        x = x.reshape(-1, m).mean(axis=0)
        t = t[:m]
    n = x.size
    base = np.exp(-2j * math.pi * f0 * t)
    phasors = np.empty(h_max + 1, dtype=complex)
    phasors[0] = x.mean()
    # rotate incrementally; re-seed periodically to bound rounding drift
    rot = base.copy()
    for h in range(1, h_max + 1):
        if h % 64 == 0:
            rot = np.exp(-2j * math.pi * h * f0 * t)
        phasors[h] = 2.0 * np.dot(x, rot) / n
        rot *= base
    amps = np.abs(phasors)
    amps[0] = abs(phasors[0].real)
    phases = np.angle(phasors)
    phases[0] = 0.0 if phasors[0].real >= 0 else math.pi
    return Spectrum(f0=f0, amplitudes=amps, phases=phases)


def thd(spec: Spectrum, h_max: int | None = None) -> float:
    """Total harmonic distortion as a ratio (not percent).

    ``sqrt(sum_{h=2..h_max} A_h^2) / A_1``; DC is excluded.
    """
    if h_max is None:
        h_max = spec.h_max
    if h_max > spec.h_max:
        raise AnalysisError(f"h_max {h_max} exceeds spectrum length {spec.h_max}")
    a1 = spec.amplitudes[1]
    if not a1 > 0:
        raise AnalysisError("no fundamental detected")
    return float(np.sqrt(np.sum(spec.amplitudes[2:h_max + 1] ** 2)) / a1)


def average_power(v: TimeSeries, i: TimeSeries) -> float:
    """Mean of the pointwise product ``v*i`` in watts."""
    if v.dt != i.dt or v.t0 != i.t0 or len(v) != len(i):
        raise AnalysisError("voltage and current must share dt, t0 and length")
    return float(np.mean(v.samples * i.samples))


def full_spectrum(ts: TimeSeries) -> FrequencyTable:
    """One-sided FFT magnitudes of the whole record, for plotting."""
    n = len(ts)
    mags = np.abs(np.fft.rfft(ts.samples)) * (2.0 / n)
    mags[0] /= 2.0
    if n % 2 == 0:
        mags[-1] /= 2.0
    return FrequencyTable(np.fft.rfftfreq(n, ts.dt), mags, n)


def write_waveform_csv(ts: TimeSeries, path) -> None:
    """Write ``t_s,value`` CSV."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write("t_s,value\n")
            for t, x in zip(ts.t, ts.samples):
                fh.write(f"{float(t)!r},{float(x)!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write waveform to {path}: {exc}") from exc


def read_waveform_csv(path) -> TimeSeries:
    """Read a ``t_s,value`` CSV; the sample period is taken from the time column."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["t_s", "value"]:
            raise AnalysisError(f"{path}: expected header 't_s,value', got {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    if len(rows) < 2:
        raise AnalysisError(f"{path}: need at least two samples")
    t = np.array([r[0] for r in rows])
    steps = np.diff(t)
    dt = float((t[-1] - t[0]) / (t.size - 1))
    if np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise AnalysisError(f"{path}: samples are not uniformly spaced")
    return TimeSeries(np.array([r[1] for r in rows]), dt, float(t[0]))
