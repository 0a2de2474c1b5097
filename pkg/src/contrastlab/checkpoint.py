"""Binary checkpoint format for encoder parameters.

Layout: 8-byte magic, uint32 header length, UTF-8 JSON header, then the raw
little-endian float64 blobs in header order. The header records the format
version, the encoder config, and each parameter's name/shape/offset, so a
load rebuilds the exact model. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .encoder import EncoderConfig, SharedEncoder
from .errors import FormatVersionError, InvalidArgumentError

MAGIC = b"CTLBCKPT"
FORMAT_VERSION = 1


def _config_to_dict(cfg: EncoderConfig) -> dict:
    return {
        "num_layers": cfg.num_layers,
        "num_heads": cfg.num_heads,
        "hidden_dim": cfg.hidden_dim,
        "ff_dim": cfg.ff_dim,
        "dropout_rate": cfg.dropout_rate,
        "max_seq_len": cfg.max_seq_len,
        "vocab_size": cfg.vocab_size,
        "image_size": list(cfg.image_size),
        "patch_grid": list(cfg.patch_grid),
        "spectrogram_shape": list(cfg.spectrogram_shape),
        "audio_block": list(cfg.audio_block),
        "layer_norm_eps": cfg.layer_norm_eps,
    }


def _config_from_dict(d: dict) -> EncoderConfig:
    return EncoderConfig(
        num_layers=d["num_layers"],
        num_heads=d["num_heads"],
        hidden_dim=d["hidden_dim"],
        ff_dim=d["ff_dim"],
        dropout_rate=d["dropout_rate"],
        max_seq_len=d["max_seq_len"],
        vocab_size=d["vocab_size"],
        image_size=tuple(d["image_size"]),
        patch_grid=tuple(d["patch_grid"]),
        spectrogram_shape=tuple(d["spectrogram_shape"]),
        audio_block=tuple(d["audio_block"]),
        layer_norm_eps=d["layer_norm_eps"],
    )


def save_checkpoint(path: str | Path, encoder: SharedEncoder) -> None:
    names = sorted(encoder.params)
    header = {
        "format_version": FORMAT_VERSION,
        "encoder_config": _config_to_dict(encoder.config),
        "parameters": [
            {"name": n, "shape": list(encoder.params[n].shape)} for n in names
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for n in names:
            f.write(encoder.params[n].data.astype("<f8", copy=False).tobytes("C"))


def load_checkpoint(path: str | Path) -> SharedEncoder:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise FormatVersionError(f"{path}: not a checkpoint file")
        (header_len,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(header_len).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise FormatVersionError(
                f"{path}: unsupported checkpoint version "
                f"{header.get('format_version')!r} (expected {FORMAT_VERSION})"
            )
        cfg = _config_from_dict(header["encoder_config"])
        encoder = SharedEncoder(cfg, init_seed=0)
        state: dict[str, np.ndarray] = {}
        for entry in header["parameters"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = f.read(count * 8)
            if len(raw) != count * 8:
                raise InvalidArgumentError(f"{path}: truncated checkpoint")
            state[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    encoder.load_state_dict(state)
    return encoder
