"""Exception hierarchy shared across the toolkit."""


class RamdecError(Exception):
    """Base class for all toolkit errors."""


class ArkError(RamdecError):
    """Archive stream could not be decoded or encoded."""


class DataError(RamdecError):
    """Mismatched or out-of-range dataset contents (keys, frames, labels)."""


class ModelError(RamdecError):
    """Invalid model definition or model file."""


class TrainingError(ModelError):
    """Training aborted (non-finite loss)."""


class FstError(RamdecError):
    """Decoding graph or symbol table text could not be parsed."""


class RemoteError(RamdecError):
    """Remote posterior request failed (transport, timeout, or server-reported)."""


class ProtocolError(RemoteError):
    """Remote response violated the predict wire contract."""


class DecodeError(RamdecError):
    """Beam search failed (collapse, epsilon cycle, empty lattice)."""


class ScoringError(RamdecError):
    """Reference/hypothesis transcript sets are inconsistent."""
