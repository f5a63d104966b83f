"""IQ Mirror: duplicate a sample stream into fixed-size inference windows.

A bounded ring buffer sits between the receive chain (producer) and the
classifier (consumer).  `push` never blocks: when the buffer is full the
oldest samples are discarded and counted, so a slow consumer can never
stall the radio.  Windows of `window_size` samples are emitted every
`extraction_stride` samples of the accepted stream; stride < window gives
overlapping windows, stride > window skips samples (coarse sampling).

Single-producer/single-consumer: one thread may push while another
extracts; a lock makes the pair safe.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

__all__ = ["MirrorConfig", "MirrorStats", "IqMirror"]


@dataclass(frozen=True)
class MirrorConfig:
    window_size: int
    extraction_stride: int | None = None  # None -> window_size (non-overlapping)
    capacity: int | None = None           # None -> 8 windows

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be positive")
        stride = self.window_size if self.extraction_stride is None else self.extraction_stride
        if stride < 1:
            raise ValueError("extraction_stride must be >= 1")
        cap = 8 * self.window_size if self.capacity is None else self.capacity
        if cap < self.window_size:
            raise ValueError("capacity must be >= window_size")
        object.__setattr__(self, "extraction_stride", stride)
        object.__setattr__(self, "capacity", cap)


@dataclass
class MirrorStats:
    windows_emitted: int = 0
    samples_accepted: int = 0
    samples_dropped: int = 0
    high_water_mark: int = 0


class IqMirror:
    """Ring-buffered stream mirror with strided window extraction."""

    def __init__(self, config: MirrorConfig):
        self.config = config
        self._buf = np.zeros(config.capacity, dtype=np.complex64)
        self._lock = threading.Lock()
        # absolute sample indices into the accepted stream
        self._base = 0        # index of oldest retained sample
        self._end = 0         # one past newest retained sample
        self._next_start = 0  # start of the next window to emit
        self._stats = MirrorStats()

    @property
    def stats(self) -> MirrorStats:
        with self._lock:
            s = self._stats
            return MirrorStats(s.windows_emitted, s.samples_accepted,
                               s.samples_dropped, s.high_water_mark)

    @property
    def fill(self) -> int:
        with self._lock:
            return self._end - self._base

    def push(self, samples: np.ndarray) -> int:
        """Append a chunk; oldest samples are dropped on overflow.

        Returns the number of samples accepted (always the chunk length).
        """
        chunk = np.ascontiguousarray(samples, dtype=np.complex64)
        n = len(chunk)
        if n == 0:
            raise ValueError("chunk must be nonempty")
        cap = self.config.capacity
        with self._lock:
            if n >= cap:
                # chunk alone overflows: keep only its tail
                self._write(chunk[-cap:], self._end + n - cap)
                dropped = (self._end - self._base) + (n - cap)
                self._base = self._end + n - cap
                self._end += n
                self._stats.samples_dropped += dropped
            else:
                overflow = (self._end - self._base) + n - cap
                self._write(chunk, self._end)
                self._end += n
                if overflow > 0:
                    self._base += overflow
                    self._stats.samples_dropped += overflow
            self._stats.samples_accepted += n
            self._stats.high_water_mark = max(self._stats.high_water_mark,
                                              self._end - self._base)
            if self._next_start < self._base:
                # the planned window start fell off the buffer; restart the
                # stride chain at the oldest retained sample
                self._next_start = self._base
        return n

    def _write(self, chunk: np.ndarray, abs_start: int) -> None:
        cap = self.config.capacity
        pos = abs_start % cap
        first = min(len(chunk), cap - pos)
        self._buf[pos:pos + first] = chunk[:first]
        if first < len(chunk):
            self._buf[: len(chunk) - first] = chunk[first:]

    def next_window(self) -> np.ndarray | None:
        """Emit the next window, or None if not enough data is buffered."""
        cfg = self.config
        with self._lock:
            start = self._next_start
            if self._end - start < cfg.window_size:
                return None
            cap = cfg.capacity
            pos = start % cap
            first = min(cfg.window_size, cap - pos)
            out = np.empty(cfg.window_size, dtype=np.complex64)
            out[:first] = self._buf[pos:pos + first]
            if first < cfg.window_size:
                out[first:] = self._buf[: cfg.window_size - first]
            self._next_start = start + cfg.extraction_stride
            self._stats.windows_emitted += 1
            return out

    def residual(self) -> int:
        """Accepted samples not yet consumed by the window chain."""
        with self._lock:
            return self._stats.samples_accepted - self._next_start
