"""Dataset records, WAV I/O and a tiny synthetic-audio language.

A dataset file holds one JSON object per line::

    {"sample_id": "s1", "question": "...", "candidates": ["a", "b"],
     "gold_answer": "a", "synth": "10s silence + 1s burst @2s"}

``audio_path`` (mono PCM WAV, relative to the dataset file) may be given
instead of ``synth``.

Synthetic specs are ``+``-separated parts ``<dur>s <kind> [amp] [@<t>s]``
with kind one of silence, noise, burst, tone, speech. Parts without ``@``
are laid end to end; parts with ``@`` are mixed in at that offset. The
clip lasts until the latest part ends.
"""

from __future__ import annotations

import hashlib
import json
import re
import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from audiocascade.domain import AudioClip, Query
from audiocascade.orchestrator import Sample, normalize_answer

DEFAULT_RATE = 16000
DEFAULT_AMPLITUDE = {"silence": 0.0, "noise": 0.01, "burst": 0.8, "tone": 0.5, "speech": 0.6}

_PART = re.compile(
    r"^(?P<dur>\d+(?:\.\d+)?)\s*s\s+(?P<kind>silence|noise|burst|tone|speech)"
    r"(?:\s+(?P<amp>\d*\.?\d+))?(?:\s*@\s*(?P<at>\d+(?:\.\d+)?)\s*s)?$"
)

RECORD_FIELDS = {"sample_id", "question", "candidates", "gold_answer", "synth", "audio_path", "sample_rate"}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class SynthPart:
    kind: str
    start_s: float
    duration_s: float
    amplitude: float


def parse_synth(spec: str) -> list[SynthPart]:
    parts = []
    cursor = 0.0
    for raw in spec.split("+"):
        m = _PART.match(raw.strip())
        if not m:
            raise DatasetError(f"bad synthetic part {raw.strip()!r}")
        dur = float(m["dur"])
        if dur <= 0:
            raise DatasetError(f"part {raw.strip()!r} has zero duration")
        kind = m["kind"]
        amp = float(m["amp"]) if m["amp"] else DEFAULT_AMPLITUDE[kind]
        if not 0 <= amp <= 1:
            raise DatasetError(f"amplitude {amp} outside [0, 1]")
        if m["at"] is None:
            start = cursor
            cursor += dur
        else:
            start = float(m["at"])
        parts.append(SynthPart(kind, start, dur, amp))
    return parts


def synth_duration(spec: str) -> float:
    return max(p.start_s + p.duration_s for p in parse_synth(spec))


def synthesize(spec: str, sample_rate: int = DEFAULT_RATE, clip_id: str = "synth",
               seed: Optional[int] = None) -> AudioClip:
    parts = parse_synth(spec)
    n = int(round(max(p.start_s + p.duration_s for p in parts) * sample_rate))
    if seed is None:
        seed = int.from_bytes(hashlib.sha256(f"{clip_id}|{spec}".encode()).digest()[:8], "little")
    rng = np.random.default_rng(seed)
    x = np.zeros(n, dtype=np.float32)
    for p in parts:
        lo = int(round(p.start_s * sample_rate))
        hi = min(n, int(round((p.start_s + p.duration_s) * sample_rate)))
        if hi <= lo or p.kind == "silence" or p.amplitude == 0:
            continue
        m = hi - lo
        t = np.arange(m, dtype=np.float32) / sample_rate
        if p.kind in ("noise", "burst"):
            seg = rng.uniform(-p.amplitude, p.amplitude, m).astype(np.float32)
        elif p.kind == "tone":
            seg = p.amplitude * np.sin(2 * np.pi * 440.0 * t)
        else:  # speech-like: a voiced carrier under a syllable-rate envelope
            envelope = 0.5 + 0.5 * np.sin(2 * np.pi * 4.0 * t)
            seg = p.amplitude * envelope * np.sin(2 * np.pi * 180.0 * t)
        x[lo:hi] += seg.astype(np.float32)
    np.clip(x, -1.0, 1.0, out=x)
    return AudioClip(x, sample_rate, clip_id)


def read_wav(path, clip_id: Optional[str] = None) -> AudioClip:
    """Decode a mono integer-PCM WAV into [-1, 1] floats."""
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            frames = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DatasetError(f"{path}: not a PCM WAV file ({exc})") from None
    if channels != 1:
        raise DatasetError(f"{path}: expected mono audio, got {channels} channels")
    if width == 1:
        x = (np.frombuffer(frames, dtype=np.uint8).astype(np.float32) - 128.0) / 128.0
    elif width == 2:
        x = np.frombuffer(frames, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 3:
        b = np.frombuffer(frames, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float32) / float(1 << 23)
    elif width == 4:
        x = (np.frombuffer(frames, dtype="<i4").astype(np.float64) / 2147483648.0).astype(np.float32)
    else:
        raise DatasetError(f"{path}: unsupported sample width {width}")
    return AudioClip(x, rate, clip_id or Path(path).stem)


def write_wav(path, clip: AudioClip) -> None:
    pcm = np.clip(np.round(clip.samples.astype(np.float64) * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


@dataclass(frozen=True)
class DatasetRecord:
    sample_id: str
    audio_source: Union[str, Path]
    question: str
    candidates: tuple[str, ...]
    gold_answer: str
    is_synthetic: bool = False
    sample_rate: int = DEFAULT_RATE

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if self.candidates and normalize_answer(self.gold_answer) not in {normalize_answer(c) for c in self.candidates}:
            raise DatasetError(f"{self.sample_id}: gold answer {self.gold_answer!r} is not a candidate")

    @property
    def query(self) -> Query:
        return Query(self.question, self.candidates, self.sample_id)

    def load_clip(self) -> AudioClip:
        if self.is_synthetic:
            return synthesize(str(self.audio_source), self.sample_rate, self.sample_id)
        return read_wav(self.audio_source, self.sample_id)

    def to_sample(self) -> Sample:
        return Sample(self.query, self.load_clip, self.gold_answer)


def load_dataset(path) -> list[DatasetRecord]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: dataset file not found")
    records: list[DatasetRecord] = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                raw = json.loads(line)
            except ValueError as exc:
                raise DatasetError(f"{where}: malformed record ({exc})") from None
            if not isinstance(raw, dict):
                raise DatasetError(f"{where}: record is not an object")
            unknown = set(raw) - RECORD_FIELDS
            if unknown:
                raise DatasetError(f"{where}: unknown fields {sorted(unknown)}")
            missing = {"sample_id", "question", "gold_answer"} - set(raw)
            if missing:
                raise DatasetError(f"{where}: missing fields {sorted(missing)}")
            if ("synth" in raw) == ("audio_path" in raw):
                raise DatasetError(f"{where}: give exactly one of 'synth' or 'audio_path'")
            if raw["sample_id"] in seen:
                raise DatasetError(f"{where}: duplicate sample_id {raw['sample_id']!r}")
            seen.add(raw["sample_id"])
            try:
                if "synth" in raw:
                    parse_synth(raw["synth"])
                    source, synthetic = raw["synth"], True
                else:
                    source, synthetic = path.parent / raw["audio_path"], False
                records.append(DatasetRecord(
                    raw["sample_id"], source, raw["question"], tuple(raw.get("candidates", ())),
                    raw["gold_answer"], synthetic, int(raw.get("sample_rate", DEFAULT_RATE)),
                ))
            except (DatasetError, ValueError) as exc:
                raise DatasetError(f"{where}: {exc}") from None
    return records
