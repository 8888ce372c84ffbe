# src/model/weights_io.py
"""Portable model file.

Little-endian layout:
    b"EFNN" | u32 version | u32 fft_size | u16 tag length | tag (utf-8) | u32 n_layers
    per layer: u8 kind | u32 input_dim | u32 output_dim | u8 activation | u8 head
    then per layer, row-major float32 arrays:
        dense: weight (out, in), bias (out)
        gru:   weight_ih (3H, in), weight_hh (3H, H), bias_ih (3H), bias_hh (3H)
"""
import logging
import os
import struct

import numpy as np
import torch

from src.model.architecture import ACTIVATIONS, LAYER_KINDS, LayerSpec, NeuralModel, validate_layers
from src.utils.exceptions import ConfigError, ModelFormatError, ModelShapeError

logger = logging.getLogger(__name__)

MAGIC = b"EFNN"
FORMAT_VERSION = 1
_LAYER = struct.Struct("<BIIBB")


def _param_names(kind: str):
    if kind == "dense":
        return ["weight", "bias"]
    return ["weight_ih_l0", "weight_hh_l0", "bias_ih_l0", "bias_hh_l0"]


def _param_shapes(spec: LayerSpec):
    i, o = spec.input_dim, spec.output_dim
    if spec.kind == "dense":
        return [(o, i), (o,)]
    return [(3 * o, i), (3 * o, o), (3 * o,), (3 * o,)]


def model_to_bytes(model: NeuralModel) -> bytes:
    tag = model.preprocessing.encode("utf-8")
    parts = [MAGIC, struct.pack("<IIH", FORMAT_VERSION, model.fft_size, len(tag)), tag,
             struct.pack("<I", len(model.specs))]
    for s in model.specs:
        parts.append(_LAYER.pack(LAYER_KINDS.index(s.kind), s.input_dim, s.output_dim,
                                 ACTIVATIONS.index(s.activation), int(s.head)))
    for s, layer in zip(model.specs, model.net.layers):
        params = dict(layer.named_parameters())
        for name in _param_names(s.kind):
            parts.append(params[name].detach().cpu().numpy().astype("<f4").tobytes(order="C"))
    return b"".join(parts)


def save_model(model: NeuralModel, path: str):
    out_dir = os.path.dirname(path)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    with open(path, "wb") as f:
        f.write(model_to_bytes(model))
    logger.info(f"Saved model ({len(model.specs)} layers, tag {model.preprocessing}) to {path}")


def model_from_bytes(blob: bytes, source: str = "<bytes>") -> NeuralModel:
    """Parse a model file.

    Raises:
        ModelFormatError: bad magic, unsupported version, truncated or oversized payload.
        ModelShapeError: layer table whose dimensions do not chain.
    """
    view = memoryview(blob)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise ModelFormatError(f"{source}: truncated at byte {offset}, needs {n} more")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise ModelFormatError(f"{source}: not a model file (bad magic)")
    version, fft_size, tag_len = struct.unpack("<IIH", take(10))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{source}: format version {version}, this build reads {FORMAT_VERSION}")
    try:
        tag = bytes(take(tag_len)).decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelFormatError(f"{source}: preprocessing tag is not utf-8") from e
    (n_layers,) = struct.unpack("<I", take(4))
    specs = []
    for _ in range(n_layers):
        kind, i, o, act, head = _LAYER.unpack(take(_LAYER.size))
        if kind >= len(LAYER_KINDS) or act >= len(ACTIVATIONS):
            raise ModelFormatError(f"{source}: unknown layer kind {kind} or activation {act}")
        specs.append(LayerSpec(LAYER_KINDS[kind], i, o, ACTIVATIONS[act], bool(head)))
    try:
        validate_layers(specs)
    except ConfigError as e:
        raise ModelFormatError(f"{source}: {e}") from e

    expected = 4 * sum(int(np.prod(shape)) for s in specs for shape in _param_shapes(s))
    remaining = len(view) - offset
    if remaining != expected:
        raise ModelFormatError(f"{source}: weight payload is {remaining} bytes, layer table needs {expected}")

    try:
        model = NeuralModel(specs, preprocessing=tag, fft_size=fft_size)
    except ConfigError as e:
        raise ModelFormatError(f"{source}: {e}") from e
    with torch.no_grad():
        for s, layer in zip(specs, model.net.layers):
            params = dict(layer.named_parameters())
            for name, shape in zip(_param_names(s.kind), _param_shapes(s)):
                count = int(np.prod(shape))
                values = np.frombuffer(take(4 * count), dtype="<f4").reshape(shape)
                params[name].copy_(torch.from_numpy(values.astype(np.float32)))
    return model


def load_model(path: str, expected_fft_size: int = None) -> NeuralModel:
    if not os.path.exists(path):
        raise ModelFormatError(f"model file not found: {path}")
    with open(path, "rb") as f:
        model = model_from_bytes(f.read(), source=path)
    if expected_fft_size is not None and model.fft_size != expected_fft_size:
        raise ModelShapeError(f"{path}: built for FFT size {model.fft_size}, pipeline uses {expected_fft_size}")
    logger.info(f"Loaded model from {path}: {[(s.kind, s.input_dim, s.output_dim) for s in model.specs]}")
    return model
