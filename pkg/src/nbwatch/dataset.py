"""Balanced labeled datasets of IQ windows with a bit-exact on-disk format.

Class layout for N spectrum portions (M = N + 2 classes):

  0      no RF emissions (noise floor only)
  1      legitimate OFDM traffic only
  2 + k  narrowband interference on portion k, legitimate traffic present

Scenes mimic packetized captures: the legitimate transmitter sends bursts
(a few window lengths long) separated by longer idle gaps, while an
interference-class scene keeps its interferer on for the whole capture.
Windows are cut at random offsets, so interference-class windows sample
every packet phase: interferer-over-packet, interferer alone between
packets, and packet edges.  Legit-only windows are constrained to overlap
a burst, otherwise their label would be indistinguishable from silence.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from nbwatch.signalgen import (
    ConfigurationError,
    InterfererSpec,
    OfdmParams,
    SceneSpec,
    SpectrumConfig,
    Waveform,
    compose_scene,
)

__all__ = [
    "ClassLabel",
    "LabeledDataset",
    "DatasetFormatError",
    "num_classes",
    "class_name",
    "portion_of_class",
    "generate_dataset",
    "split_dataset",
    "save_dataset",
    "load_dataset",
]

# scene geometry in units of the window length I (see module docstring)
SCENE_LEN_WINDOWS = 64
PACKET_LEN_WINDOWS = (4, 10)
IDLE_LEN_WINDOWS = (16, 40)

# 802.11-style subcarrier occupancy: DC plus 11 edge-guard bins nulled,
# leaving 52 of 64 active
WIFI_INACTIVE_SUBCARRIERS = (0,) + tuple(range(27, 38))

DEFAULT_GAIN_RANGE = (0.3, 1.0)

ClassLabel = int


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed or truncated."""


def num_classes(n_portions: int) -> int:
    return n_portions + 2


def class_name(label: int, n_portions: int) -> str:
    if label == 0:
        return "no_rf"
    if label == 1:
        return "legit_only"
    if 2 <= label < n_portions + 2:
        return f"interference_p{label - 2}"
    raise ValueError(f"label {label} out of range for N={n_portions}")


def portion_of_class(label: int) -> int | None:
    """Portion index carried by an interference class, else None."""
    return label - 2 if label >= 2 else None


@dataclass
class LabeledDataset:
    """Windows are complex64 of shape (count, input_size); labels uint16.

    `split` maps 'train'/'val'/'test' to disjoint index arrays once
    split_dataset has run, and is None before that.
    """

    spectrum: SpectrumConfig
    input_size: int
    windows: np.ndarray
    labels: np.ndarray
    split: dict[str, np.ndarray] | None = None

    @property
    def n_classes(self) -> int:
        return num_classes(self.spectrum.n_portions)

    def subset(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        if self.split is None:
            raise ValueError("dataset has no split; run split_dataset first")
        idx = self.split[name]
        return self.windows[idx], self.labels[idx]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


def _packet_schedule(scene_len: int, input_size: int,
                     rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    """Alternating packet/idle segments with a random phase."""
    lo_on, hi_on = (v * input_size for v in PACKET_LEN_WINDOWS)
    lo_off, hi_off = (v * input_size for v in IDLE_LEN_WINDOWS)
    segs = []
    pos = -int(rng.integers(0, hi_off + 1))
    on = bool(rng.random() < 0.5)
    while pos < scene_len:
        if on:
            seg = int(rng.integers(lo_on, hi_on + 1))
            a, b = max(pos, 0), min(pos + seg, scene_len)
            if b > a:
                segs.append((a, b - a))
        else:
            seg = int(rng.integers(lo_off, hi_off + 1))
        pos += seg
        on = not on
    return tuple(segs)


def _window_scene(spectrum: SpectrumConfig, input_size: int, label: int,
                  waveform: Waveform, gain_range, dataset_seed: int,
                  index: int) -> tuple[SceneSpec, int, int]:
    """Build the scene behind window `index` of class `label`.

    Returns (scene, scene_len, window_offset); fully determined by
    (dataset_seed, label, index), so any window can be regenerated for
    label-soundness spot checks.
    """
    meta_ss, scene_ss = np.random.SeedSequence([dataset_seed, label, index]).spawn(2)
    rng = np.random.default_rng(meta_ss)
    scene_seed = int(scene_ss.generate_state(1, np.uint64)[0])
    scene_len = max(1024, SCENE_LEN_WINDOWS * input_size)

    legit = None
    bursts: tuple[tuple[int, int], ...] = ()
    if label >= 1:
        legit = OfdmParams(inactive_subcarriers=WIFI_INACTIVE_SUBCARRIERS)
        bursts = _packet_schedule(scene_len, input_size, rng)

    interferers: tuple[InterfererSpec, ...] = ()
    if label >= 2:
        gain = float(rng.uniform(*gain_range))
        interferers = (InterfererSpec(
            portion_index=label - 2,
            waveform=waveform,
            gain=gain,
            start_sample=0,
            duration_samples=scene_len,
        ),)

    scene = SceneSpec(spectrum=spectrum, legit=legit, legit_bursts=bursts,
                      interferers=interferers, seed=scene_seed)

    if label == 1:
        # the window must actually contain the burst it is labeled with
        occ = np.zeros(scene_len)
        for start, dur in bursts:
            occ[start:start + dur] = 1.0
        csum = np.concatenate([[0.0], np.cumsum(occ)])
        overlap = csum[input_size:] - csum[:-input_size]
        valid = np.where(overlap >= 0.9 * input_size)[0]
        if len(valid) == 0:
            valid = np.where(overlap >= overlap.max())[0]
        offset = int(valid[rng.integers(0, len(valid))])
    else:
        offset = int(rng.integers(0, scene_len - input_size + 1))
    return scene, scene_len, offset


def generate_dataset(spectrum: SpectrumConfig, input_size: int, per_class: int,
                     waveform: Waveform = Waveform.GAUSSIAN_NOISE,
                     seed: int = 0,
                     gain_range: tuple[float, float] = DEFAULT_GAIN_RANGE,
                     ) -> LabeledDataset:
    """Render a balanced dataset of M * per_class labeled windows.

    Interference-class windows come from scenes with packetized legitimate
    traffic plus one interferer (gain drawn uniformly from gain_range) on
    the labeled portion.  Deterministic per seed.
    """
    if per_class < 1:
        raise ConfigurationError("per_class must be >= 1")
    if input_size < 2:
        raise ConfigurationError("input_size must be >= 2")
    if not 0.0 <= gain_range[0] <= gain_range[1] <= 1.0:
        raise ConfigurationError("gain_range must be ordered within [0, 1]")
    m = num_classes(spectrum.n_portions)
    windows = np.empty((m * per_class, input_size), dtype=np.complex64)
    labels = np.empty(m * per_class, dtype=np.uint16)
    pos = 0
    for label in range(m):
        for i in range(per_class):
            scene, scene_len, offset = _window_scene(
                spectrum, input_size, label, waveform, gain_range, seed, i)
            rendered = compose_scene(scene, scene_len)
            windows[pos] = rendered[offset:offset + input_size]
            labels[pos] = label
            pos += 1
    return LabeledDataset(spectrum=spectrum, input_size=input_size,
                          windows=windows, labels=labels)


def regenerate_window(ds_spectrum: SpectrumConfig, input_size: int, label: int,
                      waveform: Waveform, seed: int, index: int,
                      gain_range: tuple[float, float] = DEFAULT_GAIN_RANGE,
                      ) -> tuple[SceneSpec, np.ndarray, int]:
    """Rebuild the scene and window behind a generated dataset entry."""
    scene, scene_len, offset = _window_scene(
        ds_spectrum, input_size, label, waveform, gain_range, seed, index)
    rendered = compose_scene(scene, scene_len)
    return scene, rendered[offset:offset + input_size], offset


def split_dataset(ds: LabeledDataset, seed: int = 0) -> LabeledDataset:
    """Populate a stratified, disjoint, exhaustive 80/10/10 split."""
    if len(ds.windows) == 0:
        raise ValueError("cannot split an empty dataset")
    counts = ds.class_counts()
    if counts.min() < 10:
        raise ValueError(
            f"need >= 10 windows per class to stratify, got min {counts.min()}")
    rng = np.random.default_rng(seed)
    train, val, test = [], [], []
    for label in range(ds.n_classes):
        idx = np.where(ds.labels == label)[0]
        rng.shuffle(idx)
        c = len(idx)
        n_val = round(0.1 * c)
        n_test = round(0.1 * c)
        val.append(idx[:n_val])
        test.append(idx[n_val:n_val + n_test])
        train.append(idx[n_val + n_test:])
    split = {
        "train": np.sort(np.concatenate(train)),
        "val": np.sort(np.concatenate(val)),
        "test": np.sort(np.concatenate(test)),
    }
    return replace(ds, split=split)


# ---------------------------------------------------------------------------
# on-disk format (version 1)
#
#   magic  b"NBW1"
#   u16    version = 1
#   u32    input_size I
#   u32    class count M
#   u64    window count
#   f64    channel_bandwidth_hz, sample_rate_hz, noise_floor_db
#   count * { I*2 f32 little-endian IQ, u16 label }
#   3 * { u64 length, length * u64 indices }   (train, val, test; all zero
#                                               lengths when unsplit)
# ---------------------------------------------------------------------------

MAGIC = b"NBW1"
VERSION = 1
_HEADER = struct.Struct("<4sHIIQddd")


def _window_dtype(input_size: int) -> np.dtype:
    return np.dtype([("iq", "<f4", (input_size, 2)), ("label", "<u2")])


def save_dataset(ds: LabeledDataset, path) -> None:
    """Write the dataset; load_dataset(path) restores it bit-exactly."""
    count = len(ds.windows)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(
            MAGIC, VERSION, ds.input_size, ds.n_classes, count,
            ds.spectrum.channel_bandwidth_hz, ds.spectrum.sample_rate_hz,
            ds.spectrum.noise_floor_db))
        rec = np.empty(count, dtype=_window_dtype(ds.input_size))
        rec["iq"][:, :, 0] = ds.windows.real
        rec["iq"][:, :, 1] = ds.windows.imag
        rec["label"] = ds.labels
        rec.tofile(fh)
        for name in ("train", "val", "test"):
            idx = ds.split[name] if ds.split is not None else np.empty(0, np.uint64)
            fh.write(struct.pack("<Q", len(idx)))
            np.ascontiguousarray(idx, dtype="<u8").tofile(fh)


def _read_exact(fh, nbytes: int, what: str) -> bytes:
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise DatasetFormatError(
            f"truncated dataset file: wanted {nbytes} bytes for {what} at "
            f"offset {fh.tell() - len(data)}, got {len(data)}")
    return data


def load_dataset(path) -> LabeledDataset:
    """Read a dataset written by save_dataset."""
    with open(path, "rb") as fh:
        header = _read_exact(fh, _HEADER.size, "header")
        magic, version, input_size, m, count, bw, rate, floor = _HEADER.unpack(header)
        if magic != MAGIC:
            raise DatasetFormatError(f"bad magic {magic!r} at offset 0")
        if version != VERSION:
            raise DatasetFormatError(f"unsupported dataset version {version}")
        if m < 3:
            raise DatasetFormatError(f"class count {m} too small")
        dtype = _window_dtype(input_size)
        rec = np.frombuffer(_read_exact(fh, count * dtype.itemsize, "windows"),
                            dtype=dtype)
        windows = (rec["iq"][:, :, 0] + 1j * rec["iq"][:, :, 1]).astype(np.complex64)
        labels = rec["label"].astype(np.uint16)
        split_parts = {}
        for name in ("train", "val", "test"):
            (n,) = struct.unpack("<Q", _read_exact(fh, 8, f"{name} split length"))
            idx = np.frombuffer(_read_exact(fh, 8 * n, f"{name} split"), dtype="<u8")
            split_parts[name] = idx.astype(np.int64)
        trailing = fh.read(1)
        if trailing:
            raise DatasetFormatError(f"trailing bytes at offset {fh.tell() - 1}")
    split = None
    if any(len(v) for v in split_parts.values()):
        split = split_parts
    spectrum = SpectrumConfig(channel_bandwidth_hz=bw, sample_rate_hz=rate,
                              n_portions=m - 2, noise_floor_db=floor)
    return LabeledDataset(spectrum=spectrum, input_size=input_size,
                          windows=windows, labels=labels, split=split)
