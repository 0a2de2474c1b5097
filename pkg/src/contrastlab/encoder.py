"""Shared Transformer encoder with text, image, and audio front-ends.

One parameter set serves all modalities: the front-ends (token table, patch
projection, block projection, positional tables, per-modality CLS vectors)
are modality-specific, everything from the first attention layer up is
shared. The CLS output row is the representation every loss and metric
consumes.

The stack is pre-norm (attention and feed-forward read a layer-normalized
copy and add back residually), which trains stably from random init at this
scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from . import rng
from .autograd import Parameter, Tensor
from .errors import (
    DegenerateInputError,
    InvalidArgumentError,
    PatchingError,
    SequenceLengthError,
    VocabularyError,
)

# Token id 0 is reserved: it fills the CLS slot at position 0 and any padding
# beyond a sequence's length. Real tokens start at 1.
RESERVED_TOKEN = 0

_MASK_BIAS = -1e9


@dataclass(frozen=True)
class EncoderConfig:
    num_layers: int = 2
    num_heads: int = 4
    hidden_dim: int = 64
    ff_dim: int = 128
    dropout_rate: float = 0.1
    max_seq_len: int = 64
    vocab_size: int = 512
    image_size: tuple[int, int] = (16, 16)
    patch_grid: tuple[int, int] = (4, 4)
    spectrogram_shape: tuple[int, int] = (32, 8)
    audio_block: tuple[int, int] = (8, 8)
    layer_norm_eps: float = 1e-5

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise InvalidArgumentError(
                f"hidden_dim {self.hidden_dim} not divisible by "
                f"num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidArgumentError(
                f"dropout_rate must be in [0, 1), got {self.dropout_rate}"
            )
        h, w = self.image_size
        rows, cols = self.patch_grid
        if h % rows != 0 or w % cols != 0:
            raise PatchingError(
                f"image size {self.image_size} not divisible into "
                f"patch grid {self.patch_grid}"
            )
        needed = 1 + max(image_token_count(self), audio_token_count(self))
        if self.max_seq_len < needed:
            raise InvalidArgumentError(
                f"max_seq_len {self.max_seq_len} shorter than the longest "
                f"modal sequence ({needed})"
            )

    @property
    def patch_size(self) -> tuple[int, int]:
        return (
            self.image_size[0] // self.patch_grid[0],
            self.image_size[1] // self.patch_grid[1],
        )


def image_token_count(cfg: EncoderConfig) -> int:
    """Number of image patches (excluding CLS)."""
    return cfg.patch_grid[0] * cfg.patch_grid[1]


def audio_token_count(cfg: EncoderConfig) -> int:
    """Number of spectrogram blocks (excluding CLS).

    Blocks tile the time-frequency plane without overlap; leftover frames or
    bins that do not fill a block are dropped, as a stride-equals-kernel
    convolution would.
    """
    frames, bins = cfg.spectrogram_shape
    bt, bf = cfg.audio_block
    return (frames // bt) * (bins // bf)


def image_sequence_length(cfg: EncoderConfig) -> int:
    return image_token_count(cfg) + 1


def audio_sequence_length(cfg: EncoderConfig) -> int:
    return audio_token_count(cfg) + 1


# Published full-scale geometry: 224x224 images in a 14x14 patch grid and
# 1024x128 spectrograms in 48x12 blocks. Only the sequence-length logic is
# ever exercised at this size; weights are never allocated for it.
FULL_SCALE_CONFIG = EncoderConfig(
    num_layers=12,
    num_heads=12,
    hidden_dim=768,
    ff_dim=3072,
    max_seq_len=512,
    vocab_size=30522,
    image_size=(224, 224),
    patch_grid=(14, 14),
    spectrogram_shape=(1024, 128),
    audio_block=(48, 12),
)


@dataclass
class TokenBatch:
    """Integer token ids (B x L) with position 0 reserved for the CLS slot."""

    token_ids: np.ndarray
    lengths: list[int]

    def __post_init__(self):
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64)
        if self.token_ids.ndim != 2:
            raise InvalidArgumentError("token_ids must be 2-d (batch x length)")
        if len(self.lengths) != self.token_ids.shape[0]:
            raise InvalidArgumentError("lengths must match the batch size")


@dataclass
class PatchBatch:
    """Images as B x 3 x H x W float arrays with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 4 or self.pixels.shape[1] != 3:
            raise InvalidArgumentError(
                f"pixels must be B x 3 x H x W, got {self.pixels.shape}"
            )


@dataclass
class SpectrogramBatch:
    """Mel-like magnitudes as B x T x F float arrays."""

    frames: np.ndarray

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3:
            raise InvalidArgumentError(
                f"frames must be B x T x F, got {self.frames.shape}"
            )


@dataclass
class Representation:
    """Per-example CLS embeddings, shape B x h; may carry gradient context."""

    vectors: Tensor

    def numpy(self) -> np.ndarray:
        return self.vectors.data

    @property
    def shape(self) -> tuple[int, ...]:
        return self.vectors.shape


def _xavier(gen: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-bound, bound, size=(fan_in, fan_out))


class SharedEncoder:
    """The trainable model: three embedding front-ends over one Transformer."""

    def __init__(self, config: EncoderConfig, init_seed: int = 0):
        self.config = config
        self.params: dict[str, Parameter] = {}
        self._build(init_seed)

    # -- parameters ---------------------------------------------------------

    def _add(self, name: str, value: np.ndarray) -> Parameter:
        p = Parameter(value, name)
        self.params[name] = p
        return p

    def _build(self, seed: int) -> None:
        cfg = self.config
        h = cfg.hidden_dim

        def gen(name: str) -> np.random.Generator:
            return rng.stream(seed, f"init/{name}")

        def normal(name: str, shape: tuple[int, ...], std: float = 0.02):
            self._add(name, gen(name).normal(0.0, std, size=shape))

        def xavier(name: str, fan_in: int, fan_out: int):
            self._add(name, _xavier(gen(name), fan_in, fan_out))

        def zeros(name: str, shape: tuple[int, ...]):
            self._add(name, np.zeros(shape))

        def ones(name: str, shape: tuple[int, ...]):
            self._add(name, np.ones(shape))

        normal("text/token_emb", (cfg.vocab_size, h))
        normal("text/pos_emb", (cfg.max_seq_len, h))
        normal("text/cls", (h,))

        ph, pw = cfg.patch_size
        patch_dim = 3 * ph * pw
        xavier("image/proj_w", patch_dim, h)
        zeros("image/proj_b", (h,))
        normal("image/pos_emb", (image_sequence_length(cfg), h))
        normal("image/cls", (h,))

        bt, bf = cfg.audio_block
        xavier("audio/proj_w", bt * bf, h)
        zeros("audio/proj_b", (h,))
        normal("audio/pos_emb", (audio_sequence_length(cfg), h))
        normal("audio/cls", (h,))

        for i in range(cfg.num_layers):
            pre = f"enc/layer{i}"
            ones(f"{pre}/ln_attn_gain", (h,))
            zeros(f"{pre}/ln_attn_bias", (h,))
            for proj in ("q", "k", "v", "o"):
                xavier(f"{pre}/w{proj}", h, h)
                zeros(f"{pre}/b{proj}", (h,))
            ones(f"{pre}/ln_ff_gain", (h,))
            zeros(f"{pre}/ln_ff_bias", (h,))
            xavier(f"{pre}/ff1_w", h, cfg.ff_dim)
            zeros(f"{pre}/ff1_b", (cfg.ff_dim,))
            xavier(f"{pre}/ff2_w", cfg.ff_dim, h)
            zeros(f"{pre}/ff2_b", (h,))
        ones("enc/ln_final_gain", (h,))
        zeros("enc/ln_final_bias", (h,))

    def shared_parameters(self) -> list[Parameter]:
        return [p for n, p in self.params.items() if n.startswith("enc/")]

    def frontend_parameters(self, modality: str) -> list[Parameter]:
        if modality not in ("text", "image", "audio"):
            raise InvalidArgumentError(f"unknown modality {modality!r}")
        return [p for n, p in self.params.items() if n.startswith(modality + "/")]

    def path_parameters(self, modality: str) -> list[Parameter]:
        """Parameters reachable from one modality's loss: front-end + stack."""
        return self.frontend_parameters(modality) + self.shared_parameters()

    def all_parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        extra = set(state) - set(self.params)
        if missing or extra:
            raise InvalidArgumentError(
                f"state dict mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for n, value in state.items():
            self.params[n].assign(value)

    # -- front-ends ---------------------------------------------------------

    def embed_text(self, batch: TokenBatch) -> Tensor:
        """Token + positional embeddings with the learned CLS vector at slot 0."""
        cfg = self.config
        ids = batch.token_ids
        if ids.min() < 0 or ids.max() >= cfg.vocab_size:
            raise VocabularyError(
                f"token ids must lie in [0, {cfg.vocab_size}), "
                f"got range [{ids.min()}, {ids.max()}]"
            )
        b, length = ids.shape
        if length > cfg.max_seq_len:
            raise SequenceLengthError(
                f"sequence length {length} exceeds max_seq_len {cfg.max_seq_len}"
            )
        cls = ag.broadcast_to(
            ag.reshape(self.params["text/cls"], (1, 1, cfg.hidden_dim)),
            (b, 1, cfg.hidden_dim),
        )
        if length > 1:
            tok = ag.embedding(self.params["text/token_emb"], ids[:, 1:])
            seq = ag.concat([cls, tok], axis=1)
        else:
            seq = cls
        pos = self.params["text/pos_emb"][:length]
        return ag.add(seq, ag.reshape(pos, (1, length, cfg.hidden_dim)))

    def _patchify(self, pixels: np.ndarray) -> np.ndarray:
        """B x 3 x H x W -> B x P x (3*ph*pw), channel-major within a patch."""
        cfg = self.config
        b = pixels.shape[0]
        gh, gw = cfg.patch_grid
        ph, pw = cfg.patch_size
        if pixels.shape[2] != cfg.image_size[0] or pixels.shape[3] != cfg.image_size[1]:
            raise PatchingError(
                f"pixel grid {pixels.shape[2:]} does not match configured "
                f"image size {cfg.image_size}"
            )
        x = pixels.reshape(b, 3, gh, ph, gw, pw)
        x = x.transpose(0, 2, 4, 1, 3, 5)  # b, gh, gw, c, ph, pw
        return x.reshape(b, gh * gw, 3 * ph * pw)

    def embed_image(self, batch: PatchBatch) -> Tensor:
        """Flattened non-overlapping patches, projected, CLS prepended."""
        cfg = self.config
        patches = Tensor(self._patchify(batch.pixels))
        proj = ag.linear(patches, self.params["image/proj_w"], self.params["image/proj_b"])
        b = batch.pixels.shape[0]
        cls = ag.broadcast_to(
            ag.reshape(self.params["image/cls"], (1, 1, cfg.hidden_dim)),
            (b, 1, cfg.hidden_dim),
        )
        seq = ag.concat([cls, proj], axis=1)
        length = image_sequence_length(cfg)
        pos = ag.reshape(self.params["image/pos_emb"], (1, length, cfg.hidden_dim))
        return ag.add(seq, pos)

    def _blockify(self, frames: np.ndarray) -> np.ndarray:
        """B x T x F -> B x S x (bt*bf); trailing remainder frames/bins dropped."""
        cfg = self.config
        t_cfg, f_cfg = cfg.spectrogram_shape
        if frames.shape[1] != t_cfg or frames.shape[2] != f_cfg:
            raise PatchingError(
                f"spectrogram layout {frames.shape[1:]} does not match "
                f"configured shape {cfg.spectrogram_shape}"
            )
        bt, bf = cfg.audio_block
        nt, nf = t_cfg // bt, f_cfg // bf
        b = frames.shape[0]
        x = frames[:, : nt * bt, : nf * bf]
        x = x.reshape(b, nt, bt, nf, bf)
        x = x.transpose(0, 1, 3, 2, 4)  # b, nt, nf, bt, bf
        return x.reshape(b, nt * nf, bt * bf)

    def embed_audio(self, batch: SpectrogramBatch) -> Tensor:
        """Time-frequency blocks, projected, CLS prepended."""
        cfg = self.config
        blocks = Tensor(self._blockify(batch.frames))
        proj = ag.linear(blocks, self.params["audio/proj_w"], self.params["audio/proj_b"])
        b = batch.frames.shape[0]
        cls = ag.broadcast_to(
            ag.reshape(self.params["audio/cls"], (1, 1, cfg.hidden_dim)),
            (b, 1, cfg.hidden_dim),
        )
        seq = ag.concat([cls, proj], axis=1)
        length = audio_sequence_length(cfg)
        pos = ag.reshape(self.params["audio/pos_emb"], (1, length, cfg.hidden_dim))
        return ag.add(seq, pos)

    # -- transformer stack --------------------------------------------------

    def _dropout(self, x: Tensor, seed: int | None, site: str) -> Tensor:
        if seed is None:
            return x
        return ag.apply_dropout(
            x, self.config.dropout_rate, rng.derive_seed(seed, site)
        )

    def _attention(
        self, x: Tensor, layer: int, mask_bias: np.ndarray | None, seed: int | None
    ) -> Tensor:
        cfg = self.config
        b, length, h = x.shape
        heads = cfg.num_heads
        dh = h // heads
        pre = f"enc/layer{layer}"

        def split_heads(t: Tensor) -> Tensor:
            t = ag.reshape(t, (b, length, heads, dh))
            return ag.transpose(t, (0, 2, 1, 3))

        q = split_heads(ag.linear(x, self.params[f"{pre}/wq"], self.params[f"{pre}/bq"]))
        k = split_heads(ag.linear(x, self.params[f"{pre}/wk"], self.params[f"{pre}/bk"]))
        v = split_heads(ag.linear(x, self.params[f"{pre}/wv"], self.params[f"{pre}/bv"]))

        scores = ag.mul(ag.matmul(q, ag.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
        if mask_bias is not None:
            scores = ag.add(scores, Tensor(mask_bias))
        probs = ag.softmax(scores, axis=-1)
        probs = self._dropout(probs, seed, f"layer{layer}/attn_probs")
        ctx = ag.matmul(probs, v)
        ctx = ag.reshape(ag.transpose(ctx, (0, 2, 1, 3)), (b, length, h))
        out = ag.linear(ctx, self.params[f"{pre}/wo"], self.params[f"{pre}/bo"])
        return self._dropout(out, seed, f"layer{layer}/attn_out")

    def _feed_forward(self, x: Tensor, layer: int, seed: int | None) -> Tensor:
        pre = f"enc/layer{layer}"
        hidden = ag.gelu(
            ag.linear(x, self.params[f"{pre}/ff1_w"], self.params[f"{pre}/ff1_b"])
        )
        out = ag.linear(hidden, self.params[f"{pre}/ff2_w"], self.params[f"{pre}/ff2_b"])
        return self._dropout(out, seed, f"layer{layer}/ff_out")

    def encode(
        self,
        features: Tensor,
        lengths: list[int] | None = None,
        dropout_seed: int | None = None,
    ) -> Representation:
        """Run the shared stack and return the CLS row of the final layer.

        ``dropout_seed=None`` is eval mode (no stochastic sites active); any
        integer seed fully determines every dropout mask.
        """
        cfg = self.config
        b, length, h = features.shape
        if length > cfg.max_seq_len:
            raise SequenceLengthError(
                f"sequence length {length} exceeds max_seq_len {cfg.max_seq_len}"
            )

        mask_bias = None
        if lengths is not None:
            valid = np.arange(length)[None, :] < np.asarray(lengths)[:, None]
            mask_bias = np.where(valid, 0.0, _MASK_BIAS)[:, None, None, :]

        x = self._dropout(features, dropout_seed, "embed")
        eps = cfg.layer_norm_eps
        for i in range(cfg.num_layers):
            pre = f"enc/layer{i}"
            normed = ag.layer_norm(
                x, self.params[f"{pre}/ln_attn_gain"], self.params[f"{pre}/ln_attn_bias"], eps
            )
            x = ag.add(x, self._attention(normed, i, mask_bias, dropout_seed))
            normed = ag.layer_norm(
                x, self.params[f"{pre}/ln_ff_gain"], self.params[f"{pre}/ln_ff_bias"], eps
            )
            x = ag.add(x, self._feed_forward(normed, i, dropout_seed))
        x = ag.layer_norm(
            x, self.params["enc/ln_final_gain"], self.params["enc/ln_final_bias"], eps
        )
        cls = x[:, 0, :]
        norms = np.linalg.norm(cls.data, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateInputError("encoder produced a zero-norm CLS row")
        return Representation(cls)

    def encode_twice(
        self,
        features: Tensor,
        lengths: list[int] | None,
        seed_a: int,
        seed_b: int,
    ) -> tuple[Representation, Representation]:
        """Two encodings of the same features under independent dropout masks."""
        if seed_a == seed_b:
            raise InvalidArgumentError(
                "encode_twice needs distinct seeds; equal seeds would produce "
                "degenerate positive pairs"
            )
        return (
            self.encode(features, lengths, seed_a),
            self.encode(features, lengths, seed_b),
        )
