from __future__ import annotations

from typing import Optional, Protocol, runtime_checkable

from audiocascade.domain import AudioClip, PerceptionResult, Query, Window


@runtime_checkable
class EdgePerceptionBackend(Protocol):
    """Local audio-language model.

    ``scope`` of None means the whole clip; otherwise the model should run
    on ``slice_clip(clip, *scope)``.
    """

    name: str
    nominal_latency_s: float

    def infer(self, clip: AudioClip, query: Query, scope: Optional[Window] = None) -> PerceptionResult: ...


@runtime_checkable
class AsrBackend(Protocol):
    name: str
    nominal_latency_s: float

    def transcribe(self, clip: AudioClip, scope: Optional[Window] = None) -> tuple[str, float]:
        """Return ``(text, latency_s)``."""
        ...


@runtime_checkable
class CloudControllerBackend(Protocol):
    """Cloud side of the pipeline, addressed by wire messages.

    ``call`` takes a request already validated against the request schema
    and returns a response validated against the response schema. A
    ``latency_s`` field in the response is the server-side service time.
    """

    name: str

    def call(self, endpoint: str, request: dict) -> dict: ...
