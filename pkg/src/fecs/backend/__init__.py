from .base import (
    Backend,
    BackendConnectionError,
    BackendError,
    BackendInfo,
    ContextOverflowError,
    NextDistribution,
    ProtocolError,
)
from .remote import RemoteBackend, connect_remote
from .synthetic import (
    SyntheticBackend,
    SyntheticModelSpec,
    build_synthetic,
    load_spec,
    random_synthetic_spec,
    save_spec,
)

__all__ = [
    "Backend",
    "BackendConnectionError",
    "BackendError",
    "BackendInfo",
    "ContextOverflowError",
    "NextDistribution",
    "ProtocolError",
    "RemoteBackend",
    "SyntheticBackend",
    "SyntheticModelSpec",
    "build_synthetic",
    "connect_remote",
    "load_spec",
    "random_synthetic_spec",
    "save_spec",
]
