from audiocascade.backends.base import AsrBackend, CloudControllerBackend, EdgePerceptionBackend
from audiocascade.backends.planner import reference_plan
from audiocascade.backends.protocol import BackendError, NetworkError, ProtocolError
from audiocascade.backends.remote import RemoteCloudController
from audiocascade.backends.scripted import (
    FixtureError,
    FixtureMiss,
    ScriptedAsr,
    ScriptedCloud,
    ScriptedEdge,
    ScriptedFixture,
)

__all__ = [
    "AsrBackend",
    "BackendError",
    "CloudControllerBackend",
    "EdgePerceptionBackend",
    "FixtureError",
    "FixtureMiss",
    "NetworkError",
    "ProtocolError",
    "RemoteCloudController",
    "ScriptedAsr",
    "ScriptedCloud",
    "ScriptedEdge",
    "ScriptedFixture",
    "reference_plan",
]
