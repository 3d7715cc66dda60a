"""Tiny decoder-only transformer built on the autograd tensor."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rlvr_lab.tensor import Tensor, TensorError
from rlvr_lab.tensor import ops

logger = logging.getLogger(__name__)

# Large finite value for masked attention logits; keeps the tape finite.
_MASK_VALUE = -1e30


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    vocab_size: int = Field(32, ge=2)
    d_model: int = Field(64, ge=1)
    n_layers: int = Field(2, ge=1)
    n_heads: int = Field(4, ge=1)
    max_len: int = Field(256, ge=2)
    init_std: float = Field(0.02, gt=0.0)

    @model_validator(mode="after")
    def _heads_divide_width(self) -> "ModelConfig":
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def parameter_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in checkpoint order."""
    d, v = cfg.d_model, cfg.vocab_size
    shapes: list[tuple[str, tuple[int, ...]]] = [("tok_emb", (v, d)), ("pos_emb", (cfg.max_len, d))]
    for i in range(cfg.n_layers):
        p = f"h{i}"
        shapes += [
            (f"{p}.ln1.gain", (d,)), (f"{p}.ln1.bias", (d,)),
            (f"{p}.attn.wq", (d, d)), (f"{p}.attn.wk", (d, d)),
            (f"{p}.attn.wv", (d, d)), (f"{p}.attn.wo", (d, d)),
            (f"{p}.ln2.gain", (d,)), (f"{p}.ln2.bias", (d,)),
            (f"{p}.mlp.w_in", (d, 4 * d)), (f"{p}.mlp.w_out", (4 * d, d)),
        ]
    shapes += [("ln_f.gain", (d,)), ("ln_f.bias", (d,)), ("head", (d, v))]
    return shapes


@dataclass
class PolicyParams:
    """Named parameter tensors of one policy instance (pi_theta, pi_old or pi_ref)."""
    config: ModelConfig
    tensors: dict[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def named_tensors(self) -> Iterator[tuple[str, Tensor]]:
        for name, _ in parameter_shapes(self.config):
            yield name, self.tensors[name]

    @property
    def num_params(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def copy(self, requires_grad: Optional[bool] = None) -> "PolicyParams":
        """Deep copy; frozen snapshots pass requires_grad=False."""
        return PolicyParams(
            config=self.config.model_copy(),
            tensors={
                name: Tensor(
                    t.data,
                    requires_grad=t.requires_grad if requires_grad is None else requires_grad,
                    name=name,
                )
                for name, t in self.named_tensors()
            },
        )

    def set_requires_grad(self, flag: bool) -> None:
        for t in self.tensors.values():
            t.requires_grad = flag

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient arrays by name; parameters without a gradient get zeros."""
        return {
            name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
            for name, t in self.named_tensors()
        }

    def equals(self, other: "PolicyParams") -> bool:
        """Bit-identical parameter values and architecture."""
        if self.config != other.config:
            return False
        return all(np.array_equal(t.data, other.tensors[name].data) for name, t in self.named_tensors())


def init_params(cfg: ModelConfig, seed: int, zero_head: bool = False) -> PolicyParams:
    """Gaussian(0, init_std) weights, unit layer-norm gains, zero biases.

    ``zero_head`` zeroes the output projection so every position starts
    from the uniform distribution.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(cfg):
        if name.endswith(".gain"):
            data = np.ones(shape)
        elif name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            data = rng.normal(0.0, cfg.init_std, size=shape)
        if name == "head" and zero_head:
            data = np.zeros(shape)
        tensors[name] = Tensor(data, requires_grad=True, name=name)
    params = PolicyParams(cfg, tensors)
    logger.debug("Initialised policy with %d parameters (seed %s)", params.num_params, seed)
    return params


def _attention(params: PolicyParams, layer: str, h: Tensor, mask: np.ndarray) -> Tensor:
    cfg = params.config
    hd = cfg.head_dim
    q = h @ params[f"{layer}.attn.wq"]
    k = h @ params[f"{layer}.attn.wk"]
    v = h @ params[f"{layer}.attn.wv"]
    heads = []
    for i in range(cfg.n_heads):
        lo, hi = i * hd, (i + 1) * hd
        scores = ops.scale(ops.slice_cols(q, lo, hi) @ ops.transpose(ops.slice_cols(k, lo, hi)), 1.0 / math.sqrt(hd))
        weights = ops.softmax(ops.masked_fill(scores, mask, _MASK_VALUE))
        heads.append(weights @ ops.slice_cols(v, lo, hi))
    merged = heads[0] if len(heads) == 1 else ops.concat(heads, axis=1)
    return merged @ params[f"{layer}.attn.wo"]


def forward_logits(params: PolicyParams, tokens: Sequence[int]) -> Tensor:
    """Next-token logits [T x V]; row t depends only on tokens[: t + 1]."""
    cfg = params.config
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise TensorError("forward_logits needs a non-empty flat token sequence")
    if ids.size > cfg.max_len:
        raise TensorError(f"sequence length {ids.size} exceeds max_len {cfg.max_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise TensorError(f"token id out of range for vocabulary of {cfg.vocab_size}")

    t = ids.size
    x = ops.embedding(params["tok_emb"], ids) + ops.embedding(params["pos_emb"], np.arange(t))
    causal = np.triu(np.ones((t, t), dtype=bool), k=1)
    for i in range(cfg.n_layers):
        layer = f"h{i}"
        h = ops.layer_norm(x, params[f"{layer}.ln1.gain"], params[f"{layer}.ln1.bias"])
        x = x + _attention(params, layer, h, causal)
        h = ops.layer_norm(x, params[f"{layer}.ln2.gain"], params[f"{layer}.ln2.bias"])
        x = x + ops.gelu(h @ params[f"{layer}.mlp.w_in"]) @ params[f"{layer}.mlp.w_out"]
    x = ops.layer_norm(x, params["ln_f.gain"], params["ln_f.bias"])
    return x @ params["head"]
