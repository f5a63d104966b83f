"""CNN narrowband-interference detector plus an energy-detector baseline.

`classify` wraps a trained Model: softmax probabilities, top class, and the
softmax-threshold multi-interferer read-out (probability mass >= threshold
on an interference class flags its portion, even though the network was
trained single-label).  `energy_detect` is the classic averaged-periodogram
baseline: it localizes energy per spectrum portion but is blind to what
kind of waveform produced it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from nbwatch.neuralnet import Model, forward, iq_to_tensor
from nbwatch.signalgen import SpectrumConfig

__all__ = [
    "DetectionReport",
    "EnergyDetectorConfig",
    "classify",
    "detect_multi",
    "energy_detect",
    "welch_psd",
    "portion_levels_db",
    "evaluate",
    "bench_latency",
]

MULTI_SIGNAL_THRESHOLD = 0.15


@dataclass
class DetectionReport:
    probs: np.ndarray
    top_class: int
    interfered_portions: tuple[int, ...]
    latency_ns: int


def _window_tensor(model: Model, window: np.ndarray) -> np.ndarray:
    w = np.asarray(window)
    if np.iscomplexobj(w):
        if w.ndim != 1:
            raise ValueError("complex window must be one-dimensional")
        if len(w) != model.config.input_size:
            raise ValueError(
                f"window length {len(w)} != model input_size "
                f"{model.config.input_size}")
        return iq_to_tensor(w)
    if w.shape != (model.config.input_size, 2):
        raise ValueError(
            f"real window shape {w.shape} != ({model.config.input_size}, 2)")
    return w[None, :, :].astype(np.float64)


def classify(model: Model, window: np.ndarray,
             threshold: float = MULTI_SIGNAL_THRESHOLD) -> DetectionReport:
    """Classify one IQ window (complex vector or (I, 2) real tensor)."""
    x = _window_tensor(model, window)
    t0 = time.perf_counter_ns()
    probs, _ = forward(model, x)
    latency = time.perf_counter_ns() - t0
    probs = probs[0]
    return DetectionReport(
        probs=probs,
        top_class=int(probs.argmax()),
        interfered_portions=detect_multi(probs, threshold),
        latency_ns=int(latency),
    )


def detect_multi(probs: np.ndarray, threshold: float = MULTI_SIGNAL_THRESHOLD
                 ) -> tuple[int, ...]:
    """Portions whose interference-class softmax mass reaches `threshold`.

    Classes 0 (silence) and 1 (legit only) are never returned.
    """
    probs = np.asarray(probs)
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if probs.ndim != 1 or len(probs) < 3:
        raise ValueError("probs must be one M-vector with M >= 3")
    portions = np.nonzero(probs[2:] >= threshold)[0]
    return tuple(int(k) for k in portions)


@dataclass(frozen=True)
class EnergyDetectorConfig:
    """Averaged-periodogram energy detector settings.

    `noise_floor_db` is the calibration source: the known/measured total
    noise power in dB (None means trust SpectrumConfig.noise_floor_db).
    A portion is flagged when its integrated power rises threshold_db
    above the per-portion share of that floor.
    """

    fft_size: int | None = None  # None -> whole buffer, capped at 1024
    threshold_db: float = 6.0
    noise_floor_db: float | None = None


def welch_psd(samples: np.ndarray, fft_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Hann-windowed averaged periodogram (50% overlap), fftshifted.

    Returns (freqs_normalized, psd) where psd integrates to the mean
    power of the input and freqs are in cycles/sample, centered on 0.
    """
    x = np.asarray(samples)
    if len(x) < fft_size:
        raise ValueError(f"need >= {fft_size} samples, got {len(x)}")
    win = np.hanning(fft_size)
    norm = (win ** 2).sum() * fft_size
    hop = max(fft_size // 2, 1)
    acc = np.zeros(fft_size)
    count = 0
    for start in range(0, len(x) - fft_size + 1, hop):
        seg = x[start:start + fft_size] * win
        acc += np.abs(np.fft.fft(seg)) ** 2
        count += 1
    psd = np.fft.fftshift(acc / (count * norm))
    freqs = np.fft.fftshift(np.fft.fftfreq(fft_size))
    return freqs, psd


def portion_levels_db(samples: np.ndarray, spectrum: SpectrumConfig,
                      fft_size: int) -> np.ndarray:
    """Integrated power per spectrum portion, in dB."""
    freqs, psd = welch_psd(samples, fft_size)
    freqs_hz = freqs * spectrum.sample_rate_hz
    edges = np.linspace(-spectrum.channel_bandwidth_hz / 2,
                        spectrum.channel_bandwidth_hz / 2,
                        spectrum.n_portions + 1)
    levels = np.empty(spectrum.n_portions)
    for k in range(spectrum.n_portions):
        mask = (freqs_hz >= edges[k]) & (freqs_hz < edges[k + 1])
        levels[k] = psd[mask].sum() / fft_size * len(psd)
    return 10.0 * np.log10(np.maximum(levels, 1e-30))


def energy_detect(samples: np.ndarray, spectrum: SpectrumConfig,
                  config: EnergyDetectorConfig = EnergyDetectorConfig()
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Flag spectrum portions whose energy exceeds the calibrated floor.

    Returns (flags bool[N], levels_db float[N]).
    """
    samples = np.asarray(samples)
    fft_size = config.fft_size or min(len(samples), 1024)
    if fft_size > len(samples):
        raise ValueError(
            f"fft_size {fft_size} exceeds buffer length {len(samples)}")
    levels = portion_levels_db(samples, spectrum, fft_size)
    floor_total = (spectrum.noise_floor_db if config.noise_floor_db is None
                   else config.noise_floor_db)
    per_portion_floor = floor_total - 10.0 * np.log10(spectrum.n_portions)
    flags = levels >= per_portion_floor + config.threshold_db
    return flags, levels


def evaluate(model: Model, dataset, split: str = "test", batch: int = 512
             ) -> tuple[float, np.ndarray]:
    """Accuracy and M x M confusion matrix (rows = true class) on a split."""
    windows, labels = dataset.subset(split)
    if len(windows) == 0:
        raise ValueError(f"split {split!r} is empty")
    m = model.config.num_classes
    confusion = np.zeros((m, m), dtype=np.int64)
    x = iq_to_tensor(windows)
    for s in range(0, len(x), batch):
        probs, _ = forward(model, x[s:s + batch])
        preds = probs.argmax(axis=1)
        for t, q in zip(labels[s:s + batch], preds):
            confusion[int(t), int(q)] += 1
    accuracy = float(np.trace(confusion) / confusion.sum())
    return accuracy, confusion


def bench_latency(model: Model, n_trials: int = 1000, warmup: int = 50,
                  seed: int = 0) -> dict[str, float]:
    """Single-window, single-threaded forward-pass timing (nanoseconds).

    Returns p50/p95/mean over n_trials after `warmup` unmeasured runs.
    """
    if n_trials < 100:
        raise ValueError("n_trials must be >= 100")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((1, model.config.input_size, 2))
    for _ in range(warmup):
        forward(model, x)
    times = np.empty(n_trials)
    for i in range(n_trials):
        t0 = time.perf_counter_ns()
        forward(model, x)
        times[i] = time.perf_counter_ns() - t0
    return {
        "p50_ns": float(np.percentile(times, 50)),
        "p95_ns": float(np.percentile(times, 95)),
        "mean_ns": float(times.mean()),
    }
