"""Minimal HTTP server for RAMDEC01 acoustic models speaking the JSON predict protocol."""

from .model import ModelFileError, StubModel, forward, forward_frame, load_model
from .server import PredictServer, ServerConfig

__version__ = "0.1.0"
