"""
LWDM model files.

Layout (little-endian): magic ``LWDM``, u32 version, u32 tensor count, then per
tensor: u32 name length, name bytes (utf-8), u32 rank, u32 dims..., f32 payload.
"""

import math
from pathlib import Path

import numpy as np
import torch

from .denoiser import TinyDenoiser
from .exceptions import ModelFormatError
from .types import FilePath

MAGIC = b"LWDM"
VERSION = 1


def _u32(*values: int) -> bytes:
    return np.array(values, dtype="<u4").tobytes()


def save_model(model: TinyDenoiser, file_path: FilePath) -> None:
    """Write a TinyDenoiser's parameters as an LWDM file."""
    state = model.state_dict()
    chunks = [MAGIC, _u32(VERSION, len(state))]
    for name, tensor in state.items():
        encoded = name.encode("utf-8")
        array = tensor.detach().cpu().numpy().astype("<f4")
        chunks.append(_u32(len(encoded)))
        chunks.append(encoded)
        chunks.append(_u32(array.ndim, *array.shape))
        chunks.append(array.tobytes())
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    Path(file_path).write_bytes(b"".join(chunks))


class _Cursor:
    def __init__(self, raw: bytes, file_path: str):
        self.raw = raw
        self.pos = 0
        self.file_path = file_path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise ModelFormatError("Model file is truncated", self.file_path)
        chunk = self.raw[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, count: int = 1) -> list[int]:
        return [int(v) for v in np.frombuffer(self.take(4 * count), dtype="<u4")]


def read_tensors(file_path: FilePath) -> dict[str, np.ndarray]:
    """
    Read every named tensor from an LWDM file.

    Raises:
        ModelFormatError: On a missing file, bad magic/version, truncation or
            a malformed tensor entry
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise ModelFormatError(f"File not found: {file_path}", str(file_path))

    cur = _Cursor(file_path.read_bytes(), str(file_path))
    if cur.take(4) != MAGIC:
        raise ModelFormatError("Not an LWDM model file", str(file_path))
    version, count = cur.u32(2)
    if version != VERSION:
        raise ModelFormatError(f"Unsupported LWDM version {version}", str(file_path))

    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        try:
            (name_len,) = cur.u32()
            name = cur.take(name_len).decode("utf-8")
            (rank,) = cur.u32()
            dims = cur.u32(rank) if rank else []
            size = math.prod(dims)
            payload = np.frombuffer(cur.take(4 * size), dtype="<f4")
            tensors[name] = payload.reshape(dims).copy()
        except (UnicodeDecodeError, ValueError) as e:
            raise ModelFormatError(
                f"Malformed tensor {index}: {e}", str(file_path), e
            ) from e
    if cur.pos != len(cur.raw):
        raise ModelFormatError("Trailing bytes after last tensor", str(file_path))
    return tensors


def load_model(file_path: FilePath) -> TinyDenoiser:
    """
    Load a TinyDenoiser from an LWDM file.

    Width and channel count are read off the input convolution's shape.
    """
    tensors = read_tensors(file_path)
    if "conv_in.weight" not in tensors:
        raise ModelFormatError("Missing tensor 'conv_in.weight'", str(file_path))
    width, channels = tensors["conv_in.weight"].shape[:2]
    model = TinyDenoiser(channels=int(channels), width=int(width))
    try:
        model.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    except RuntimeError as e:
        raise ModelFormatError(
            f"Tensors do not fit TinyDenoiser: {e}", str(file_path), e
        ) from e
    return model
