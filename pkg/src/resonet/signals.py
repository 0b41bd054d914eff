"""Test-signal generation, dataset handling and virtual measurement.

Classification stimuli are Gaussian-modulated tone bursts

    s(t) = A * exp(-(t - t_c)^2 / (2 sigma^2)) * cos(2 pi f_c (t - t_c) + phi)

optionally buried in white noise at a prescribed SNR.  Datasets are generated
per-sample from seeds derived as (seed, class, index), so generation order
(and any parallelism) cannot change the data.

For frequency characterization a linear chirp is injected through a fixed
transconductance and the response analyzed with a Hann STFT: the amplitude
ridge along the sweep's frequency-time trajectory, ratioed against the input
ridge, is the magnitude transfer of the network.  Residual ringing of the
undamped resonances the sweep has already crossed sits in stationary STFT
bins away from the moving ridge, which is what makes this measurement usable
on a lossless model.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError, InvalidParameterError

DEFAULT_G_M = 1e-6  # transconductance (S) used for swept-sine injection

SWEEP_PRESETS = {
    "1-100": (1.0, 100.0),
    "50-250": (50.0, 250.0),
    "1-120": (1.0, 120.0),
}


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled waveform with a unit tag ("V" or "A")."""

    rate_hz: float
    values: np.ndarray
    unit: str = "V"

    def __post_init__(self):
        if not math.isfinite(self.rate_hz) or self.rate_hz <= 0.0:
            raise InvalidParameterError(f"rate_hz must be finite and > 0, got {self.rate_hz}")
        arr = np.asarray(self.values, dtype=float).copy()
        if arr.ndim != 1:
            raise InvalidParameterError("signal values must be 1-D")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def duration_s(self) -> float:
        return len(self.values) / self.rate_hz

    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.rate_hz


def gen_pulse(rate_hz: float, duration_s: float, center_hz: float,
              sigma_s: float, amplitude: float = 1.0,
              t_center: float | None = None, phase: float = 0.0) -> Signal:
    """Gaussian-windowed tone burst; peaks at amplitude*cos(phase) at t_center."""
    if center_hz <= 0.0 or center_hz >= rate_hz / 2.0:
        raise InvalidParameterError(
            f"center_hz={center_hz} must lie in (0, rate/2={rate_hz / 2})")
    if sigma_s <= 0.0 or duration_s <= 0.0:
        raise InvalidParameterError("sigma_s and duration_s must be > 0")
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    tc = duration_s / 2.0 if t_center is None else t_center
    envelope = amplitude * np.exp(-((t - tc) ** 2) / (2.0 * sigma_s ** 2))
    return Signal(rate_hz, envelope * np.cos(2.0 * np.pi * center_hz * (t - tc) + phase))


def add_noise(sig: Signal, snr_db: float | None, rng) -> Signal:
    """Add white Gaussian noise at the given SNR; None or +inf returns sig unchanged."""
    if snr_db is None or snr_db == math.inf:
        return sig
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    power = float(np.mean(sig.values ** 2))
    if power == 0.0:
        raise InvalidParameterError("cannot set an SNR on an all-zero signal")
    noise_power = power / (10.0 ** (snr_db / 10.0))
    noise = rng.normal(0.0, math.sqrt(noise_power), size=len(sig.values))
    return Signal(sig.rate_hz, sig.values + noise, sig.unit)


# --- datasets ----------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    """Recipe for a labeled pulse dataset; one class per center frequency."""

    centers_hz: tuple[float, ...] = (30.0, 50.0, 70.0)
    rate_hz: float = 2000.0
    duration_s: float = 1.0
    sigma_s: float = 0.1
    amplitude: float = 1.0
    jitter_s: float = 0.1          # +/- uniform jitter of the burst center
    snr_db: float | None = 20.0
    train_per_class: int = 100
    test_per_class: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "centers_hz", tuple(float(c) for c in self.centers_hz))
        if len(self.centers_hz) < 2:
            raise InvalidParameterError("need at least two classes")
        for c in self.centers_hz:
            if c <= 0.0 or c >= self.rate_hz / 2.0:
                raise InvalidParameterError(f"class center {c} Hz outside (0, rate/2)")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise InvalidParameterError("sample counts must be positive")
        if self.jitter_s < 0.0 or self.jitter_s >= self.duration_s / 2.0:
            raise InvalidParameterError("jitter must be >= 0 and below half the duration")

    @property
    def n_classes(self) -> int:
        return len(self.centers_hz)


@dataclass(frozen=True)
class Sample:
    signal: Signal
    label: int
    split: str        # "train" or "test"
    class_index: int  # per-class running index (train and test share the counter)


@dataclass(frozen=True)
class Dataset:
    spec: DatasetSpec
    samples: tuple[Sample, ...]

    def split(self, which: str) -> tuple[Sample, ...]:
        return tuple(s for s in self.samples if s.split == which)


def _make_sample(dspec: DatasetSpec, label: int, index: int, split: str) -> Sample:
    # Seed derives from (seed, class, index): order- and parallelism-independent.
    rng = np.random.default_rng(np.random.SeedSequence((dspec.seed, label, index)))
    tc = dspec.duration_s / 2.0 + rng.uniform(-dspec.jitter_s, dspec.jitter_s)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    sig = gen_pulse(dspec.rate_hz, dspec.duration_s, dspec.centers_hz[label],
                    dspec.sigma_s, dspec.amplitude, t_center=tc, phase=phase)
    return Sample(add_noise(sig, dspec.snr_db, rng), label, split, index)


def gen_dataset(dspec: DatasetSpec) -> Dataset:
    """Deterministic labeled dataset with disjoint train/test indices per class."""
    samples = []
    for label in range(dspec.n_classes):
        for j in range(dspec.train_per_class):
            samples.append(_make_sample(dspec, label, j, "train"))
        for j in range(dspec.test_per_class):
            samples.append(_make_sample(dspec, label, dspec.train_per_class + j, "test"))
    return Dataset(dspec, tuple(samples))


def save_dataset(ds: Dataset, out_dir, force: bool = False) -> Path:
    """Write one bare-values CSV per sample plus manifest.json; returns manifest path."""
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not force:
        raise ConfigError(f"{manifest_path} already exists (use force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in ds.samples:
        name = f"class{s.label}_{s.split}_{s.class_index:04d}.csv"
        with open(out / name, "w") as fh:
            fh.writelines(f"{float(v)!r}\n" for v in s.signal.values)
        entries.append({"path": name, "label": s.label, "split": s.split})
    manifest = {
        "rate": ds.spec.rate_hz,
        "classes": list(ds.spec.centers_hz),
        "samples": entries,
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_dataset(manifest_path) -> Dataset:
    """Rehydrate a dataset written by save_dataset."""
    path = Path(manifest_path)
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    try:
        rate = float(manifest["rate"])
        centers = tuple(float(c) for c in manifest["classes"])
        entries = manifest["samples"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: malformed manifest: {exc}") from exc
    counters: dict[tuple[int, str], int] = {}
    samples = []
    for e in entries:
        sig = load_csv(path.parent / e["path"], rate=rate)
        label, split = int(e["label"]), str(e["split"])
        idx = counters.get((label, split), 0)
        counters[(label, split)] = idx + 1
        samples.append(Sample(sig, label, split, idx))
    if not samples:
        raise DataFormatError(f"{path}: manifest lists no samples")
    spec = DatasetSpec(centers_hz=centers, rate_hz=rate,
                       duration_s=samples[0].signal.duration_s,
                       jitter_s=0.0, snr_db=None,
                       train_per_class=max(1, counters.get((0, "train"), 1)),
                       test_per_class=counters.get((0, "test"), 0))
    return Dataset(spec, tuple(samples))


def load_csv(path, rate: float | None = None) -> Signal:
    """Read a waveform CSV: either (t, v) rows or bare values plus a rate.

    Two-column files must be uniformly sampled (1e-6 relative); non-numeric
    rows are rejected with their line number.
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric row {row!r}") from None
            if len(rows[-1]) not in (1, 2):
                raise DataFormatError(f"{path}:{lineno}: expected 1 or 2 columns, got {len(row)}")
            if len(rows[-1]) != len(rows[0]):
                raise DataFormatError(f"{path}:{lineno}: inconsistent column count")
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] == 1:
        if rate is None:
            raise DataFormatError(f"{path}: single-column file needs an explicit rate")
        return Signal(rate, arr[:, 0])
    t, v = arr[:, 0], arr[:, 1]
    if len(t) < 2:
        raise DataFormatError(f"{path}: need at least two samples to infer the rate")
    dt = np.diff(t)
    dt0 = float(np.median(dt))
    if dt0 <= 0.0 or np.any(np.abs(dt - dt0) > 1e-6 * dt0):
        raise DataFormatError(f"{path}: time column is not uniformly spaced")
    inferred = 1.0 / dt0
    if rate is not None and abs(rate - inferred) > 1e-6 * inferred:
        raise DataFormatError(f"{path}: rate {rate} contradicts time column ({inferred:.6g})")
    return Signal(inferred, v)


# --- sweeps and spectrograms --------------------------------------------------

def gen_sweep(f_start_hz: float, f_end_hz: float, duration_s: float,
              rate_hz: float, amplitude: float = 1.0) -> Signal:
    """Linear chirp; instantaneous frequency runs start -> end.

    Equal endpoints degenerate to a pure tone.  Warns when the sweep is fast
    enough to move more than 1 Hz per 10 periods at its slowest point (ridge
    extraction degrades on such sweeps).
    """
    if f_start_hz < 0.0 or f_end_hz < f_start_hz:
        raise InvalidParameterError("need 0 <= f_start <= f_end")
    if f_start_hz == 0.0 and f_end_hz == 0.0:
        raise InvalidParameterError("need f_end > 0")
    if f_end_hz >= rate_hz / 2.0:
        raise InvalidParameterError(f"f_end={f_end_hz} must stay below rate/2={rate_hz / 2}")
    if duration_s <= 0.0:
        raise InvalidParameterError("duration must be > 0")
    sweep_rate = (f_end_hz - f_start_hz) / duration_s
    f_slow = max(f_start_hz, 1e-9)
    if sweep_rate * 10.0 / f_slow > 1.0:
        warnings.warn(
            f"sweep moves {sweep_rate * 10.0 / f_slow:.2f} Hz per 10 periods at "
            f"{f_slow} Hz; consider a longer sweep", stacklevel=2)
    t = np.arange(int(round(duration_s * rate_hz))) / rate_hz
    phase = 2.0 * np.pi * (f_start_hz * t + 0.5 * sweep_rate * t * t)
    return Signal(rate_hz, amplitude * np.sin(phase))


@dataclass(frozen=True)
class Spectrogram:
    """Windowed magnitude STFT on full frames only."""

    mags: np.ndarray       # (n_frames, n_bins)
    freqs_hz: np.ndarray   # (n_bins,)
    times_s: np.ndarray    # (n_frames,) frame centers
    window_s: float
    hop_s: float


# Periodic analysis windows.  "hann" is the general-purpose default; "nuttall"
# (minimum 4-term Blackman-Harris) trades a 2x wider main lobe for ~-98 dB
# sidelobes, which high-dynamic-range ridge measurements on lossless (hence
# forever-ringing) systems need.
_WINDOWS = {
    "hann": (0.5, 0.5, 0.0, 0.0),
    "nuttall": (0.3635819, 0.4891775, 0.1365995, 0.0106411),
}


def _window_values(kind: str, n: int) -> np.ndarray:
    try:
        a0, a1, a2, a3 = _WINDOWS[kind]
    except KeyError:
        raise InvalidParameterError(
            f"unknown window {kind!r}; expected one of {sorted(_WINDOWS)}") from None
    k = 2.0 * np.pi * np.arange(n) / n
    return a0 - a1 * np.cos(k) + a2 * np.cos(2.0 * k) - a3 * np.cos(3.0 * k)


def stft(sig: Signal, window_s: float, hop_s: float | None = None,
         window: str = "hann") -> Spectrogram:
    """Magnitude spectrogram; periodic Hann window and 50% hop by default."""
    n_win = int(round(window_s * sig.rate_hz))
    if n_win < 4 or n_win > len(sig.values):
        raise InvalidParameterError(
            f"window of {n_win} samples invalid for a {len(sig.values)}-sample signal")
    hop_s = window_s / 2.0 if hop_s is None else hop_s
    n_hop = int(round(hop_s * sig.rate_hz))
    if n_hop < 1:
        raise InvalidParameterError("hop must cover at least one sample")
    window = _window_values(window, n_win)
    starts = np.arange(0, len(sig.values) - n_win + 1, n_hop)
    frames = np.lib.stride_tricks.sliding_window_view(sig.values, n_win)[starts]
    mags = np.abs(np.fft.rfft(frames * window, axis=1))
    freqs = np.fft.rfftfreq(n_win, d=1.0 / sig.rate_hz)
    times = (starts + n_win / 2.0) / sig.rate_hz
    return Spectrogram(mags=mags, freqs_hz=freqs, times_s=times,
                       window_s=n_win / sig.rate_hz, hop_s=n_hop / sig.rate_hz)


@dataclass(frozen=True)
class MeasuredTransfer:
    """Swept-sine measurement result: |H| per output over the ridge grid."""

    freqs_hz: np.ndarray   # (n_points,) ascending
    h: np.ndarray          # (n_outputs, n_points) magnitude in V/A
    g_m: float
    sweep_rate_hz_per_s: float
    window_s: float


def measure_transfer(sys, f_start_hz: float, f_end_hz: float,
                     rate_hz: float = 4000.0,
                     sweep_rate_hz_per_s: float = 0.25,
                     g_m: float = DEFAULT_G_M,
                     window_s: float = 4.0,
                     window: str = "nuttall",
                     amplitude: float = 1.0) -> MeasuredTransfer:
    """Virtual swept-sine measurement of the lattice transmission.

    A linear chirp voltage is injected as current through transconductance
    g_m; input and output spectrograms are sampled along the chirp's
    frequency-time ridge and their ratio, divided by g_m, is |H| in V/A.
    The drive level cancels out of that ratio, so ``amplitude`` only matters
    for numerical headroom.
    The chirp is padded by one window length on both sides so every reported
    frequency comes from a full analysis window.

    Two instrument defaults differ from the rest of the package and both
    exist to keep this virtual measurement faithful to the continuous-time
    transfer function:

    * ``window="nuttall"`` instead of stft's Hann: the lossless lattice keeps
      ringing at every eigenfrequency the chirp has crossed, and reading
      transmission troughs far below those rings needs sidelobe rejection
      (-98 dB) that Hann (-31 dB first sidelobe) cannot give.
    * ``rate_hz=4000.0`` instead of the 2 kHz dataset rate: leapfrog
      stepping warps each resonance to (2/dt)*asin(omega*dt/2), a relative
      pole shift of about (omega*dt)^2/24.  At 2 kHz an 80 Hz pole moves
      ~0.2 Hz, which biases |H| by ~10% two guard-bands away; at 4 kHz the
      shift drops 4x and the bias stays well inside a 5% tolerance.
    """
    from . import simulator  # local import; simulator does not import back at runtime

    if g_m <= 0.0 or not np.isfinite(g_m):
        raise InvalidParameterError("g_m must be finite and > 0")
    if sweep_rate_hz_per_s <= 0.0:
        raise InvalidParameterError("sweep rate must be > 0")
    span = f_end_hz - f_start_hz
    if span <= 0.0:
        raise InvalidParameterError("need f_start < f_end")
    if not np.isfinite(amplitude) or amplitude <= 0.0:
        raise InvalidParameterError("amplitude must be finite and > 0")

    pad_s = window_s
    pad_hz = sweep_rate_hz_per_s * pad_s
    f_lo = max(f_start_hz - pad_hz, 0.0)
    f_hi = f_end_hz + pad_hz
    duration = (f_hi - f_lo) / sweep_rate_hz_per_s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # the padded start may dip below the guidance band
        sweep = gen_sweep(f_lo, f_hi, duration, rate_hz, amplitude=amplitude)
    drive = Signal(rate_hz, g_m * sweep.values, unit="A")

    traj = simulator.run(sys, drive, simulator.SimConfig(record="outputs"))

    spec_in = stft(sweep, window_s, window=window)
    ridge_f = f_lo + sweep_rate_hz_per_s * spec_in.times_s
    keep = (ridge_f >= f_start_hz) & (ridge_f <= f_end_hz)
    bin_idx = np.argmin(np.abs(spec_in.freqs_hz[None, :] - ridge_f[keep, None]), axis=1)
    frame_idx = np.nonzero(keep)[0]
    amp_in = spec_in.mags[frame_idx, bin_idx]

    n_out = traj.values.shape[1]
    h = np.empty((n_out, len(frame_idx)))
    for ch in range(n_out):
        spec_out = stft(Signal(rate_hz, traj.values[:, ch]), window_s, window=window)
        h[ch] = spec_out.mags[frame_idx, bin_idx] / amp_in / g_m
    # The out/in ratio at a bin is dominated by the instant the chirp crosses
    # that bin's frequency (stationary phase), so the estimate belongs to the
    # bin centre, not to the frame-centre instantaneous frequency.  Report the
    # bin frequencies so cross-checks evaluate |H| where it was measured.
    return MeasuredTransfer(freqs_hz=spec_in.freqs_hz[bin_idx], h=h, g_m=g_m,
                            sweep_rate_hz_per_s=sweep_rate_hz_per_s,
                            window_s=window_s)
