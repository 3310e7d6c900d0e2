"""Standalone RAMDEC01 model container loader and forward pass.

This is a from-scratch implementation of the container and the network math;
it shares no code with the training toolkit, which is the point: the file
format plus the wire protocol are the whole integration contract.

Layout: 8-byte magic ``RAMDEC01``, u32 LE layer count, u32 LE input dim; per
layer u32 LE output dim, one activation byte (0 relu, 1 sigmoid, 2 tanh,
3 softmax), ``out*in`` float32 LE row-major weights, ``out`` float32 LE
biases. The final layer must be softmax and layer dims must chain.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"RAMDEC01"
ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax")


class ModelFileError(Exception):
    pass


@dataclass
class StubLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str


@dataclass
class StubModel:
    input_dim: int
    layers: list[StubLayer]

    @property
    def num_pdfs(self) -> int:
        return int(self.layers[-1].weight.shape[0])


def load_model(path) -> StubModel:
    with open(path, "rb") as f:
        data = f.read()
    view = memoryview(data)
    offset = 0

    def take(n: int, what: str) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise ModelFileError(f"truncated model file at byte {offset}: missing {what}")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    magic = bytes(take(8, "magic"))
    if magic != MAGIC:
        raise ModelFileError(f"bad magic {magic!r}: expected {MAGIC.decode()}")
    num_layers, input_dim = struct.unpack("<II", take(8, "header"))
    if num_layers < 1 or input_dim < 1:
        raise ModelFileError(f"implausible header: {num_layers} layers, input dim {input_dim}")
    layers: list[StubLayer] = []
    prev = input_dim
    for i in range(num_layers):
        out_dim, act_code = struct.unpack("<IB", take(5, f"layer {i} header"))
        if out_dim < 1:
            raise ModelFileError(f"layer {i}: zero output dim")
        if act_code >= len(ACTIVATIONS):
            raise ModelFileError(f"layer {i}: unknown activation code {act_code}")
        weight = np.frombuffer(take(out_dim * prev * 4, f"layer {i} weights"), dtype="<f4")
        weight = weight.reshape(out_dim, prev).copy()
        bias = np.frombuffer(take(out_dim * 4, f"layer {i} biases"), dtype="<f4").copy()
        layers.append(StubLayer(weight, bias, ACTIVATIONS[act_code]))
        prev = out_dim
    if offset != len(view):
        raise ModelFileError(f"{len(view) - offset} trailing bytes after the last layer")
    if layers[-1].activation != "softmax":
        raise ModelFileError(f"final layer activation is {layers[-1].activation}, must be softmax")
    for layer in layers[:-1]:
        if layer.activation == "softmax":
            raise ModelFileError("softmax before the final layer")
    return StubModel(int(input_dim), layers)


def forward_frame(model: StubModel, frame: np.ndarray) -> np.ndarray:
    """Posterior vector for a single frame.

    Frames are evaluated one at a time on purpose: responses must not depend
    on how a client batches its requests.
    """
    x = np.asarray(frame, dtype=np.float32)
    if x.shape != (model.input_dim,):
        raise ValueError(f"frame has dim {x.shape}, model expects ({model.input_dim},)")
    for layer in model.layers:
        z = layer.weight @ x + layer.bias
        if layer.activation == "relu":
            x = np.maximum(z, np.float32(0))
        elif layer.activation == "sigmoid":
            x = np.float32(1) / (np.float32(1) + np.exp(-z))
        elif layer.activation == "tanh":
            x = np.tanh(z)
        else:
            e = np.exp(z - z.max())
            x = (e / e.sum(dtype=np.float64)).astype(np.float32)
    return x


def forward(model: StubModel, frames: np.ndarray) -> np.ndarray:
    frames = np.asarray(frames, dtype=np.float32)
    return np.stack([forward_frame(model, frames[i]) for i in range(frames.shape[0])])
