"""Skip-gram embeddings over walk corpora, trained with negative sampling.

The maximized objective is the windowed log-softmax likelihood of context
tokens given the target token; training optimizes its standard
negative-sampling surrogate by SGD with a linearly decayed learning rate.
Gradients are computed in closed form (see _batch_update), which keeps the
trainer dependency-free and directly checkable against finite differences.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, DivergenceError
from .walks import UNK_TOKEN, WalkCorpus

FORMAT_VERSION = 1


@dataclass(slots=True)
class SkipGramConfig:
    m: int = 64
    c: int = 5
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.025
    seed: int = 0
    min_count: int = 1
    batch_size: int = 16384

    def validate(self) -> None:
        if self.m < 2:
            raise ConfigError(f"embedding dimension m must be >= 2, got {self.m}")
        if self.c < 1:
            raise ConfigError(f"context window c must be >= 1, got {self.c}")
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass(slots=True)
class EmbeddingTable:
    vocab: dict[str, int]
    input_vectors: np.ndarray   # W x m, v_w rows
    output_vectors: np.ndarray  # W x m, v'_w rows

    @property
    def dim(self) -> int:
        return int(self.input_vectors.shape[1])

    def index(self, token: str) -> int:
        return self.vocab.get(token, self.vocab[UNK_TOKEN])

    def vector(self, token: str) -> np.ndarray:
        return self.input_vectors[self.index(token)]

    def validate(self) -> None:
        if UNK_TOKEN not in self.vocab:
            raise ContractError("vocab must contain the UNK token")
        if not (np.isfinite(self.input_vectors).all()
                and np.isfinite(self.output_vectors).all()):
            raise DivergenceError("embedding table contains NaN/Inf")

    def save(self, path: str | Path) -> None:
        payload = {
            "format_version": FORMAT_VERSION,
            "W": len(self.vocab),
            "m": self.dim,
            "vocab": sorted(self.vocab, key=self.vocab.get),
            "input_vectors": self.input_vectors.tolist(),
            "output_vectors": self.output_vectors.tolist(),
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported embedding table version "
                              f"{payload.get('format_version')!r}")
        vocab = {tok: i for i, tok in enumerate(payload["vocab"])}
        table = cls(
            vocab=vocab,
            input_vectors=np.asarray(payload["input_vectors"], dtype=np.float64),
            output_vectors=np.asarray(payload["output_vectors"], dtype=np.float64),
        )
        table.validate()
        return table


# ---------------------------------------------------------------------------
# Vocabulary and training pairs
# ---------------------------------------------------------------------------

def build_vocab(corpus: WalkCorpus, min_count: int = 1) -> dict[str, int]:
    """Frequency-filtered token -> index map; UNK is always index 0.

    Indices are assigned by descending corpus frequency (ties broken
    lexicographically), so the map is stable for identical input.
    """
    if not corpus.walks:
        raise ContractError("cannot build a vocabulary from an empty corpus")
    counts = Counter(tok for walk in corpus.walks for tok in walk)
    kept = sorted(
        (tok for tok, n in counts.items() if n >= min_count and tok != UNK_TOKEN),
        key=lambda tok: (-counts[tok], tok),
    )
    vocab = {UNK_TOKEN: 0}
    for tok in kept:
        vocab[tok] = len(vocab)
    return vocab


def skipgram_pairs(walk: list[str], c: int) -> list[tuple[str, str]]:
    """All (target, context) pairs with context offset j in [-c, c] \\ {0}."""
    if c < 1:
        raise ContractError(f"context window c must be >= 1, got {c}")
    pairs: list[tuple[str, str]] = []
    n = len(walk)
    for t in range(n):
        lo = max(0, t - c)
        hi = min(n, t + c + 1)
        for j in range(lo, hi):
            if j != t:
                pairs.append((walk[t], walk[j]))
    return pairs


def corpus_pairs(corpus: WalkCorpus, vocab: dict[str, int],
                 c: int) -> tuple[np.ndarray, np.ndarray]:
    """Index-encoded (targets, contexts) over the whole corpus."""
    unk = vocab[UNK_TOKEN]
    targets: list[int] = []
    contexts: list[int] = []
    for walk in corpus.walks:
        for tgt, ctx in skipgram_pairs(walk, c):
            targets.append(vocab.get(tgt, unk))
            contexts.append(vocab.get(ctx, unk))
    return np.asarray(targets, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


# ---------------------------------------------------------------------------
# Objectives and gradients
# ---------------------------------------------------------------------------

def full_softmax_objective(input_vectors: np.ndarray, output_vectors: np.ndarray,
                           targets: np.ndarray, contexts: np.ndarray) -> float:
    """Average windowed log-softmax likelihood (the quantity training maximizes).

    Tractable only for toy vocabularies; used as the ground-truth objective in
    tests and for diagnostics. Averaging is over pairs.
    """
    if len(targets) == 0:
        raise ContractError("no pairs to evaluate")
    scores = input_vectors[targets] @ output_vectors.T  # B x W
    scores -= scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(scores).sum(axis=1))
    log_p = scores[np.arange(len(targets)), contexts] - log_z
    return float(log_p.mean())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def negative_sampling_loss(input_vectors: np.ndarray, output_vectors: np.ndarray,
                           target: int, context: int,
                           negatives: np.ndarray) -> float:
    """Per-pair surrogate loss: -log s(v'_c . v_t) - sum_k log s(-v'_k . v_t)."""
    v_t = input_vectors[target]
    s_pos = float(output_vectors[context] @ v_t)
    s_neg = output_vectors[np.asarray(negatives, dtype=np.int64)] @ v_t
    # -log sigmoid(x) == logaddexp(0, -x), stable for both signs
    return float(np.logaddexp(0.0, -s_pos) + np.logaddexp(0.0, s_neg).sum())


def negative_sampling_grads(input_vectors: np.ndarray, output_vectors: np.ndarray,
                            target: int, context: int,
                            negatives: np.ndarray
                            ) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus full-matrix gradients for one pair (finite-difference bait).

    dL/dv_t    = (s(s_pos) - 1) v'_c + sum_k s(s_k) v'_k
    dL/dv'_c   = (s(s_pos) - 1) v_t
    dL/dv'_k   = s(s_k) v_t          (accumulated over repeated negatives)
    """
    negatives = np.asarray(negatives, dtype=np.int64)
    v_t = input_vectors[target]
    u_c = output_vectors[context]
    u_n = output_vectors[negatives]
    s_pos = _sigmoid(np.asarray([float(u_c @ v_t)]))[0]
    s_neg = _sigmoid(u_n @ v_t)
    grad_in = np.zeros_like(input_vectors)
    grad_out = np.zeros_like(output_vectors)
    grad_in[target] = (s_pos - 1.0) * u_c + s_neg @ u_n
    grad_out[context] += (s_pos - 1.0) * v_t
    np.add.at(grad_out, negatives, s_neg[:, None] * v_t[None, :])
    loss = negative_sampling_loss(input_vectors, output_vectors, target, context,
                                  negatives)
    return loss, grad_in, grad_out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def _noise_distribution(targets: np.ndarray, contexts: np.ndarray,
                        vocab_size: int) -> np.ndarray:
    # Unigram^0.75, the standard negative-sampling noise distribution.
    freq = np.bincount(np.concatenate([targets, contexts]), minlength=vocab_size)
    weights = np.power(freq.astype(np.float64), 0.75)
    if weights.sum() == 0:
        weights = np.ones(vocab_size)
    return weights / weights.sum()


def _batch_update(input_vectors: np.ndarray, output_vectors: np.ndarray,
                  tgt: np.ndarray, ctx: np.ndarray, neg: np.ndarray,
                  lr: float) -> float:
    """One vectorized SGD step over a pair batch; returns the batch mean loss.

    The learning rate applies per pair (in-batch gradients are summed, not
    averaged), matching sequential skip-gram SGD conventions; batches exist
    only to vectorize. The scatter-accumulation is done with one-hot matmuls:
    the vocabulary is a handful of node-type tokens, so the W x B one-hot
    matrices are tiny and BLAS beats np.add.at by orders of magnitude.
    """
    W = input_vectors.shape[0]
    B, K = neg.shape
    v_t = input_vectors[tgt]                      # B x m
    u_c = output_vectors[ctx]                     # B x m
    u_n = output_vectors[neg]                     # B x K x m

    score_pos = np.einsum("bm,bm->b", v_t, u_c)
    score_neg = np.einsum("bkm,bm->bk", u_n, v_t)
    loss = (np.logaddexp(0.0, -score_pos)
            + np.logaddexp(0.0, score_neg).sum(axis=1)).mean()

    s_pos = _sigmoid(score_pos)
    s_neg = _sigmoid(score_neg)

    coef_pos = s_pos - 1.0                        # B
    grad_vt = coef_pos[:, None] * u_c + np.einsum("bk,bkm->bm", s_neg, u_n)

    onehot_t = np.zeros((B, W))
    onehot_t[np.arange(B), tgt] = 1.0
    grad_in = onehot_t.T @ grad_vt                # W x m

    onehot_c = np.zeros((B, W))
    onehot_c[np.arange(B), ctx] = 1.0
    grad_out = onehot_c.T @ (coef_pos[:, None] * v_t)
    flat_neg = neg.reshape(-1)
    onehot_n = np.zeros((B * K, W))
    onehot_n[np.arange(B * K), flat_neg] = 1.0
    grad_out += onehot_n.T @ (s_neg.reshape(-1, 1) * np.repeat(v_t, K, axis=0))

    input_vectors -= (lr / B) * grad_in
    output_vectors -= (lr / B) * grad_out
    return float(loss)


def train_skipgram(corpus: WalkCorpus, config: SkipGramConfig,
                   vocab: dict[str, int] | None = None) -> EmbeddingTable:
    """Train embeddings on a walk corpus; deterministic for a fixed seed.

    The learning rate decays linearly from config.lr to config.lr / 100 over
    all updates. Raises DivergenceError if any update produces NaN/Inf.
    """
    config.validate()
    if not corpus.walks:
        raise ContractError("cannot train on an empty corpus")
    if vocab is None:
        vocab = build_vocab(corpus, config.min_count)
    W = len(vocab)
    targets, contexts = corpus_pairs(corpus, vocab, config.c)
    if len(targets) == 0:
        raise ContractError("corpus yields no training pairs (all walks length 1?)")

    rng = np.random.default_rng(config.seed & (2**63 - 1))
    bound = 0.5 / config.m
    input_vectors = rng.uniform(-bound, bound, size=(W, config.m))
    output_vectors = np.zeros((W, config.m))

    noise = _noise_distribution(targets, contexts, W)
    n_pairs = len(targets)
    batches_per_epoch = (n_pairs + config.batch_size - 1) // config.batch_size
    total_steps = max(1, config.epochs * batches_per_epoch)
    step = 0
    lr_floor = config.lr / 100.0

    for _ in range(config.epochs):
        order = rng.permutation(n_pairs)
        for start in range(0, n_pairs, config.batch_size):
            idx = order[start:start + config.batch_size]
            neg = rng.choice(W, size=(len(idx), config.negatives), p=noise)
            frac = step / total_steps
            lr = config.lr + (lr_floor - config.lr) * frac
            _batch_update(input_vectors, output_vectors,
                          targets[idx], contexts[idx], neg, lr)
            step += 1
        if not (np.isfinite(input_vectors).all() and np.isfinite(output_vectors).all()):
            raise DivergenceError("skip-gram update produced NaN/Inf; lower lr")

    table = EmbeddingTable(vocab=vocab, input_vectors=input_vectors,
                           output_vectors=output_vectors)
    table.validate()
    return table
