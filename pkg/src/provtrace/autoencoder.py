"""Transformer encoder-decoder that reconstructs feature sequences.

Only the encoder is used at detection time: its outputs are mean-pooled over
valid positions and L2-normalized into one fixed-size behavior vector per
graph. The decoder exists to force that representation to carry enough
information to reconstruct the input (teacher-forced, causally masked).

Sub-layer order is post-LN, LayerNorm(x + Dropout(Sublayer(x))), with dropout
also applied to the summed input projection + positional encoding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import ConfigError, ContractError, DivergenceError
from .sequences import FeatureSequence
from . import tensorio

CHECKPOINT_VERSION = 1


@dataclass(slots=True)
class ModelConfig:
    d_model: int = 512
    n_layers: int = 6
    n_heads: int = 8
    d_ff: int | None = None          # defaults to 4 * d_model
    dropout: float = 0.1
    n_max: int = 512
    m: int = 64
    seed: int = 0

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads

    @property
    def ff_width(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model

    def validate(self) -> None:
        if self.d_model < 1 or self.n_layers < 1 or self.n_heads < 1 or self.m < 1:
            raise ConfigError("all model dimensions must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.n_max < 1:
            raise ConfigError(f"n_max must be >= 1, got {self.n_max}")


def desk_profile(m: int = 64, **overrides) -> ModelConfig:
    """Small profile used by tests and the synthetic benchmark."""
    defaults = dict(d_model=64, n_layers=2, n_heads=4, n_max=128, m=m)
    defaults.update(overrides)
    return ModelConfig(**defaults)


@dataclass(slots=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 8
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float = 1.0
    seed: int = 0
    deterministic: bool = True       # pins torch to one thread during training

    def validate(self) -> None:
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

def attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
              mask: torch.Tensor | None = None, return_weights: bool = False):
    """Scaled dot-product attention softmax(QK^T / sqrt(d_k))V.

    mask is boolean, broadcastable to the score shape (..., a, b); False
    occludes a position by setting its score to -inf before the softmax, so
    occluded weights are exactly zero. A row with every position occluded has
    no defined softmax and raises.
    """
    d_k = q.shape[-1]
    scores = q @ k.transpose(-2, -1) / math.sqrt(d_k)
    if mask is not None:
        expanded = mask.expand(scores.shape)
        if bool((~expanded).all(dim=-1).any()):
            raise ContractError("attention row with all positions occluded")
        scores = scores.masked_fill(~expanded, float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    out = weights @ v
    if return_weights:
        return out, weights
    return out


def positional_encoding(n: int, d_model: int,
                        dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Sinusoidal encoding: PE(p, 2i) = sin(p / 10000^(2i/d)), odd dims cos."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    position = torch.arange(n, dtype=dtype).unsqueeze(1)
    i2 = torch.arange(0, d_model, 2, dtype=dtype)
    angle = position / torch.pow(torch.tensor(10000.0, dtype=dtype), i2 / d_model)
    pe = torch.zeros(n, d_model, dtype=dtype)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle[:, : d_model // 2])
    return pe


def layer_norm(x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor,
               eps: float = 1e-5) -> torch.Tensor:
    """Normalize over the last axis to zero mean / unit variance, then affine."""
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + eps) * gain + bias


class LayerNorm(nn.Module):
    def __init__(self, d_model: int, eps: float = 1e-5):
        super().__init__()
        self.gain = nn.Parameter(torch.ones(d_model))
        self.bias = nn.Parameter(torch.zeros(d_model))
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class MultiHeadAttention(nn.Module):
    """h parallel attention heads over learned projections, concat + output map."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads != 0:
            raise ConfigError(f"d_model {d_model} not divisible by h {n_heads}")
        self.n_heads = n_heads
        self.d_k = d_model // n_heads
        self.w_q = nn.Linear(d_model, d_model, bias=False)
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model, bias=False)
        self.w_o = nn.Linear(d_model, d_model, bias=False)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, n, _ = x.shape
        return x.view(b, n, self.n_heads, self.d_k).transpose(1, 2)  # b,h,n,d_k

    def forward(self, x_q: torch.Tensor, x_kv: torch.Tensor,
                mask: torch.Tensor | None = None) -> torch.Tensor:
        squeeze = x_q.dim() == 2
        if squeeze:
            x_q, x_kv = x_q.unsqueeze(0), x_kv.unsqueeze(0)
            if mask is not None:
                mask = mask.unsqueeze(0)
        q = self._split(self.w_q(x_q))
        k = self._split(self.w_k(x_kv))
        v = self._split(self.w_v(x_kv))
        if mask is not None:
            mask = mask.unsqueeze(1)  # broadcast over heads
        heads = attention(q, k, v, mask)
        b, _, n, _ = heads.shape
        concat = heads.transpose(1, 2).reshape(b, n, self.n_heads * self.d_k)
        out = self.w_o(concat)
        return out.squeeze(0) if squeeze else out


class FeedForward(nn.Module):
    """Position-wise ReLU(HW1 + b1)W2 + b2."""

    def __init__(self, d_model: int, d_ff: int):
        super().__init__()
        self.w1 = nn.Linear(d_model, d_ff)
        self.w2 = nn.Linear(d_ff, d_model)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        return self.w2(torch.relu(self.w1(h)))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.ffn = FeedForward(cfg.d_model, cfg.ff_width)
        self.norm1 = LayerNorm(cfg.d_model)
        self.norm2 = LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None) -> torch.Tensor:
        x = self.norm1(x + self.drop(self.self_attn(x, x, mask)))
        x = self.norm2(x + self.drop(self.ffn(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.n_heads)
        self.ffn = FeedForward(cfg.d_model, cfg.ff_width)
        self.norm1 = LayerNorm(cfg.d_model)
        self.norm2 = LayerNorm(cfg.d_model)
        self.norm3 = LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, y: torch.Tensor, enc_out: torch.Tensor,
                self_mask: torch.Tensor | None,
                cross_mask: torch.Tensor | None) -> torch.Tensor:
        y = self.norm1(y + self.drop(self.self_attn(y, y, self_mask)))
        y = self.norm2(y + self.drop(self.cross_attn(y, enc_out, cross_mask)))
        y = self.norm3(y + self.drop(self.ffn(y)))
        return y


@dataclass(slots=True)
class EncodedOutput:
    output: torch.Tensor   # b x n x d_model contextualized sequence
    feature: torch.Tensor  # b x d_model, unit L2 norm


class TransformerAutoencoder(nn.Module):
    def __init__(self, cfg: ModelConfig, dtype: torch.dtype = torch.float32):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        torch.manual_seed(cfg.seed & (2**63 - 1))
        self.in_proj = nn.Linear(cfg.m, cfg.d_model, bias=False)
        self.out_proj = nn.Linear(cfg.d_model, cfg.m, bias=False)
        self.start_token = nn.Parameter(torch.zeros(cfg.m))
        self.enc_layers = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.n_layers))
        self.dec_layers = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.n_layers))
        self.drop = nn.Dropout(cfg.dropout)
        pe = positional_encoding(cfg.n_max, cfg.d_model, dtype=torch.float64)
        self.register_buffer("pe", pe)
        self.to(dtype)

    # -- encoder ------------------------------------------------------------

    def encode(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> EncodedOutput:
        """Project + PE + N encoder layers; pool valid rows into Feature."""
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
            if mask is not None:
                mask = mask.unsqueeze(0)
        b, n, _ = x.shape
        if n > self.cfg.n_max:
            raise ContractError(f"sequence length {n} exceeds n_max {self.cfg.n_max}")
        if mask is None:
            mask = torch.ones(b, n, dtype=torch.bool, device=x.device)
        if bool((~mask).all(dim=-1).any()):
            raise ContractError("sequence with every position padded")

        h = self.drop(self.in_proj(x) + self.pe[:n].to(x.dtype))
        attn_mask = mask.unsqueeze(1)  # b x 1 x n: occlude padded keys everywhere
        for layer in self.enc_layers:
            h = layer(h, attn_mask)

        valid = mask.to(h.dtype).unsqueeze(-1)
        pooled = (h * valid).sum(dim=1) / valid.sum(dim=1)
        norm = pooled.norm(dim=-1, keepdim=True)
        if bool((norm == 0).any()):
            raise DivergenceError("pooled encoder output has zero norm")
        feature = pooled / norm
        if squeeze:
            return EncodedOutput(output=h.squeeze(0), feature=feature.squeeze(0))
        return EncodedOutput(output=h, feature=feature)

    # -- decoder ------------------------------------------------------------

    def decode(self, y_in: torch.Tensor, enc_output: torch.Tensor,
               x_mask: torch.Tensor | None = None) -> torch.Tensor:
        """Teacher-forced decode of the shifted sequence against encoder output.

        y_in rows live in input space (m); position 0 is the start token, so
        position i may only see y_in positions <= i (causal mask) and output
        position i depends on X rows < i plus the encoder output.
        """
        squeeze = y_in.dim() == 2
        if squeeze:
            y_in = y_in.unsqueeze(0)
            enc_output = enc_output.unsqueeze(0)
            if x_mask is not None:
                x_mask = x_mask.unsqueeze(0)
        b, n, _ = y_in.shape
        if n > self.cfg.n_max:
            raise ContractError(f"sequence length {n} exceeds n_max {self.cfg.n_max}")
        if enc_output.shape[:2] != (b, n):
            raise ContractError(
                f"decoder/encoder shape mismatch: {tuple(y_in.shape[:2])} vs "
                f"{tuple(enc_output.shape[:2])}"
            )
        if x_mask is None:
            x_mask = torch.ones(b, n, dtype=torch.bool, device=y_in.device)

        # y_in position 0 (start token) is always valid; position j carries
        # X row j-1 and inherits its validity.
        y_valid = torch.ones_like(x_mask)
        y_valid[:, 1:] = x_mask[:, :-1]
        causal = torch.tril(torch.ones(n, n, dtype=torch.bool, device=y_in.device))
        self_mask = causal.unsqueeze(0) & y_valid.unsqueeze(1)
        cross_mask = x_mask.unsqueeze(1)

        h = self.drop(self.in_proj(y_in) + self.pe[:n].to(y_in.dtype))
        for layer in self.dec_layers:
            h = layer(h, enc_output, self_mask, cross_mask)
        out = self.out_proj(h)
        return out.squeeze(0) if squeeze else out

    # -- full pass ----------------------------------------------------------

    def shift_right(self, x: torch.Tensor) -> torch.Tensor:
        """Teacher-forcing input: start token followed by X rows 0..n-2."""
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(0)
        start = self.start_token.to(x.dtype).expand(x.shape[0], 1, x.shape[2])
        y_in = torch.cat([start, x[:, :-1, :]], dim=1)
        return y_in.squeeze(0) if squeeze else y_in

    def forward(self, x: torch.Tensor, mask: torch.Tensor | None = None) -> torch.Tensor:
        enc = self.encode(x, mask)
        return self.decode(self.shift_right(x), enc.output, mask)


def reconstruction_loss(x: torch.Tensor, x_hat: torch.Tensor,
                        mask: torch.Tensor | None = None) -> torch.Tensor:
    """Frobenius norm of (X - X') over valid rows; batch inputs average it."""
    if x.shape != x_hat.shape:
        raise ContractError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    diff = x - x_hat
    if mask is not None:
        diff = diff * mask.to(diff.dtype).unsqueeze(-1)
    sq = diff.pow(2).sum(dim=(-2, -1))
    return torch.sqrt(sq).mean()


# ---------------------------------------------------------------------------
# Training and inference
# ---------------------------------------------------------------------------

def _stack(sequences: list[FeatureSequence],
           dtype: torch.dtype) -> tuple[torch.Tensor, torch.Tensor]:
    x = torch.from_numpy(np.stack([s.X for s in sequences])).to(dtype)
    mask = torch.from_numpy(np.stack([s.mask for s in sequences]))
    return x, mask


def train_autoencoder(sequences: list[FeatureSequence], model_cfg: ModelConfig,
                      train_cfg: TrainConfig,
                      dtype: torch.dtype = torch.float32
                      ) -> tuple[TransformerAutoencoder, list[float]]:
    """Minibatch Adam on the reconstruction loss over benign sequences.

    Returns the trained model and the per-epoch mean loss history. Training is
    one-class: any attack-labeled sequence is a contract violation.
    """
    train_cfg.validate()
    if not sequences:
        raise ContractError("empty training dataset")
    bad = [s.graph_id for s in sequences if s.label == "attack"]
    if bad:
        raise ContractError(f"attack-labeled sequence(s) in training data: {bad[:5]}")

    if train_cfg.deterministic:
        torch.set_num_threads(1)
    torch.manual_seed(train_cfg.seed & (2**63 - 1))
    model = TransformerAutoencoder(model_cfg, dtype=dtype)
    model.train()
    optimizer = torch.optim.Adam(
        model.parameters(), lr=train_cfg.lr,
        betas=(train_cfg.beta1, train_cfg.beta2), eps=train_cfg.eps,
    )
    x_all, mask_all = _stack(sequences, dtype)
    n = len(sequences)
    shuffler = torch.Generator().manual_seed(train_cfg.seed & (2**63 - 1))
    history: list[float] = []
    for _ in range(train_cfg.epochs):
        order = torch.randperm(n, generator=shuffler)
        total = 0.0
        for start in range(0, n, train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            x, mask = x_all[idx], mask_all[idx]
            optimizer.zero_grad()
            loss = reconstruction_loss(x, model(x, mask), mask)
            if not torch.isfinite(loss):
                raise DivergenceError("NaN/Inf training loss; lower the learning rate")
            loss.backward()
            if train_cfg.grad_clip > 0:
                nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
            optimizer.step()
            total += float(loss) * len(idx)
        history.append(total / n)
    model.eval()
    return model, history


def extract_feature(sequence: FeatureSequence,
                    model: TransformerAutoencoder) -> np.ndarray:
    """Encoder-only feature for one graph; dropout disabled, decoder untouched."""
    model.eval()
    with torch.no_grad():
        dtype = next(model.parameters()).dtype
        x = torch.from_numpy(sequence.X[None, ...]).to(dtype)
        mask = torch.from_numpy(sequence.mask[None, ...])
        enc = model.encode(x, mask)
    return enc.feature[0].cpu().numpy().astype(np.float64)


def extract_features(sequences: list[FeatureSequence],
                     model: TransformerAutoencoder) -> np.ndarray:
    return np.stack([extract_feature(s, model) for s in sequences])


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: TransformerAutoencoder, path: str | Path) -> None:
    tensors = {
        name: param.detach().cpu().numpy().astype(np.float32)
        for name, param in model.state_dict().items()
        if name != "pe"  # recomputed from config on load
    }
    meta = {"checkpoint_version": CHECKPOINT_VERSION, "config": asdict(model.cfg)}
    tensorio.save_tensors(path, tensors, meta=meta)


def load_checkpoint(path: str | Path,
                    dtype: torch.dtype = torch.float32) -> TransformerAutoencoder:
    meta, tensors = tensorio.load_tensors(path)
    if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {meta.get('checkpoint_version')!r}")
    cfg = ModelConfig(**meta["config"])
    model = TransformerAutoencoder(cfg, dtype=dtype)
    state = {name: torch.from_numpy(arr).to(dtype) for name, arr in tensors.items()}
    state["pe"] = model.pe
    model.load_state_dict(state)
    model.eval()
    return model
