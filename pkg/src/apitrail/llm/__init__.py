"""Completion/embedding backend abstraction.

All network transport for the whole pipeline lives in this subpackage;
every other stage talks to a :class:`Backend` and stays transport-free.
Two implementations ship: a remote HTTP chat-completion backend and a
deterministic scripted mock used by the offline test suite.
"""

from .backend import Backend, BackendConfig, ChatRequest, RemoteBackend
from .cache import CachingBackend, cache_key
from .mock import MockBackend, MockScript, ScriptEntry, load_mock_script

__all__ = [
    "Backend",
    "BackendConfig",
    "CachingBackend",
    "ChatRequest",
    "MockBackend",
    "MockScript",
    "RemoteBackend",
    "ScriptEntry",
    "cache_key",
    "load_mock_script",
]
