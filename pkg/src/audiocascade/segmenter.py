"""On-device segment proposer.

Two strategies are combined: energy-based event detection (frames whose
RMS stands well above the clip's global RMS) and a fixed set of K windows
placed either evenly (short clips) or at relative anchors (long clips).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from audiocascade.domain import AudioClip, RoiWindow, SegmentProposal


@dataclass(frozen=True)
class SegmenterConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    energy_threshold_ratio: float = 1.5
    min_event_s: float = 0.2
    merge_gap_s: float = 0.3
    window_count: int = 4
    window_len_s: float = 3.0
    short_clip_cutoff_s: float = 12.0
    percentile_anchors: tuple[float, ...] = (0.10, 0.30, 0.50, 0.70)
    max_windows: int = 8
    dedup_overlap: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "percentile_anchors", tuple(self.percentile_anchors))
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError("need frame_ms >= hop_ms > 0")
        positive = (self.energy_threshold_ratio, self.min_event_s, self.merge_gap_s,
                    self.window_len_s, self.short_clip_cutoff_s)
        if min(positive) <= 0:
            raise ValueError("segmenter thresholds and durations must be positive")
        if self.window_count < 1 or self.max_windows < 1:
            raise ValueError("window_count and max_windows must be >= 1")
        if len(self.percentile_anchors) != self.window_count:
            raise ValueError("need one percentile anchor per fixed window")
        if not all(0 <= a < 1 for a in self.percentile_anchors):
            raise ValueError("percentile anchors must lie in [0, 1)")


def _frame_geometry(clip: AudioClip, config: SegmenterConfig) -> tuple[int, int]:
    frame = max(1, int(round(config.frame_ms * clip.sample_rate / 1000)))
    hop = max(1, int(round(config.hop_ms * clip.sample_rate / 1000)))
    return frame, hop


def _frame_bounds(n: int, frame: int, hop: int) -> tuple[np.ndarray, np.ndarray]:
    if n < frame:
        return np.array([0]), np.array([n])
    starts = np.arange(0, n - frame + 1, hop)
    ends = starts + frame
    tail = int(starts[-1]) + hop
    if n - tail >= frame / 2:
        starts = np.append(starts, tail)
        ends = np.append(ends, n)
    return starts, ends


def frame_energies(clip: AudioClip, config: SegmenterConfig = SegmenterConfig()) -> list[tuple[float, float]]:
    """Per-frame ``(frame_start_s, rms)`` over hop-aligned frames.

    A trailing partial frame is kept when it holds at least half a frame.
    """
    if clip.n_samples == 0:
        raise ValueError(f"clip {clip.id!r} is empty")
    starts, _, rms = _frames(clip, config)
    return [(int(s) / clip.sample_rate, float(r)) for s, r in zip(starts, rms)]


def _energy_csum(clip: AudioClip) -> np.ndarray:
    x = clip.samples.astype(np.float64)
    return np.concatenate(([0.0], np.cumsum(x * x)))


def _frames(clip: AudioClip, config: SegmenterConfig,
            csum: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    frame, hop = _frame_geometry(clip, config)
    starts, ends = _frame_bounds(clip.n_samples, frame, hop)
    if csum is None:
        csum = _energy_csum(clip)
    power = (csum[ends] - csum[starts]) / (ends - starts)
    return starts, ends, np.sqrt(np.maximum(power, 0.0))


def _segment_rms(clip: AudioClip, start_s: float, end_s: float) -> float:
    lo = int(math.floor(start_s * clip.sample_rate))
    hi = max(lo + 1, min(clip.n_samples, int(round(end_s * clip.sample_rate))))
    seg = clip.samples[lo:hi].astype(np.float64)
    return float(np.sqrt(np.mean(seg * seg)))


def energy_events(clip: AudioClip, config: SegmenterConfig = SegmenterConfig()) -> list[RoiWindow]:
    """Distinct high-energy events, sorted by start time.

    Runs of active frames are found first; each run's edges are then
    trimmed to the outermost hop-aligned blocks that clear the same
    threshold, so event edges land within one hop of the true onset/offset.
    """
    if clip.n_samples == 0:
        raise ValueError(f"clip {clip.id!r} is empty")
    csum = _energy_csum(clip)
    global_rms = float(np.sqrt(max(csum[-1], 0.0) / clip.n_samples))
    if global_rms == 0.0:
        return []
    threshold = config.energy_threshold_ratio * global_rms
    starts, ends, rms = _frames(clip, config, csum)
    active = rms >= threshold
    if not active.any():
        return []
    # run boundaries of consecutive active frames
    edges = np.diff(np.concatenate(([0], active.astype(np.int8), [0])))
    firsts = np.flatnonzero(edges == 1)
    lasts = np.flatnonzero(edges == -1) - 1

    # refine each run on hop-sized blocks so edges land within one hop
    _, hop = _frame_geometry(clip, config)
    n = clip.n_samples
    rate = clip.sample_rate
    runs = []
    for a, b in zip(firsts, lasts):
        lo, hi = int(starts[a]), int(ends[b])
        block_lo = np.arange(lo - lo % hop, hi, hop)
        block_hi = np.minimum(block_lo + hop, n)
        block_lo = np.maximum(block_lo, lo)
        block_rms = np.sqrt(np.maximum((csum[block_hi] - csum[block_lo]) / (block_hi - block_lo), 0.0))
        hot = np.flatnonzero(block_rms >= threshold)
        if hot.size:
            lo, hi = int(block_lo[hot[0]]), int(block_hi[hot[-1]])
        runs.append([lo / rate, hi / rate])

    merged: list[list[float]] = []
    for start, end in runs:
        if merged and start - merged[-1][1] < config.merge_gap_s:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])

    events = [(s, e) for s, e in merged if e - s >= config.min_event_s]
    return [
        RoiWindow(i, s, e, "energy_event", _segment_rms(clip, s, e))
        for i, (s, e) in enumerate(events)
    ]


def fixed_windows(clip_duration: float, config: SegmenterConfig = SegmenterConfig()) -> list[RoiWindow]:
    """K fixed windows: evenly spread for short clips, anchored for long ones."""
    if not clip_duration > 0:
        raise ValueError(f"clip duration must be positive, got {clip_duration}")
    length = config.window_len_s
    k = config.window_count
    if clip_duration < length:
        return [RoiWindow(0, 0.0, float(clip_duration), "fixed_window")]
    if clip_duration < config.short_clip_cutoff_s:
        span = clip_duration - length
        step = span / (k - 1) if k > 1 else 0.0
        starts = [i * step for i in range(k)]
    else:
        starts = [a * clip_duration for a in config.percentile_anchors]
    return [
        RoiWindow(i, s, min(clip_duration, s + length), "fixed_window")
        for i, s in enumerate(starts)
    ]


def _overlap_fraction(a: RoiWindow, b: RoiWindow) -> float:
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s)
    if inter <= 0:
        return 0.0
    return inter / min(a.length, b.length)


def propose(clip: AudioClip, config: SegmenterConfig = SegmenterConfig()) -> SegmentProposal:
    """Merge energy events and fixed windows into one ROI proposal."""
    events = energy_events(clip, config)
    fixed = fixed_windows(clip.duration_seconds, config)

    kept: list[RoiWindow] = []
    for w in events + fixed:
        if all(_overlap_fraction(w, k) < config.dedup_overlap for k in kept):
            kept.append(w)

    if len(kept) > config.max_windows:
        ranked = sorted(kept, key=lambda w: (-(w.energy_score or 0.0), w.start_s))
        kept = ranked[: config.max_windows]

    kept.sort(key=lambda w: (w.start_s, w.end_s))
    windows = tuple(
        RoiWindow(i, w.start_s, w.end_s, w.source, w.energy_score) for i, w in enumerate(kept)
    )
    return SegmentProposal(clip.id, windows, clip.duration_seconds)
