"""Bidirectional LSTM token tagger in numpy with hand-written backprop through time.

Architecture: frozen embedding lookup -> forward and reverse LSTM passes
(states concatenated per timestep) -> inverted dropout (training only) ->
per-timestep affine + sigmoid. Trained with mean binary cross-entropy and Adam.

Batches are right-padded. Inside each direction the recurrent state is zeroed
at padded positions, so the reverse pass starts from a zero state at every
sequence's last real token.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Conversation, Message, TermLexicon
from .embeddings import EmbeddingTable
from .errors import NonFiniteLoss, SequenceTooLong

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
P_CLAMP = 1e-7
_OUT_EPS = 1e-15
DIRECTIONS = ("fwd", "bwd")


@dataclass
class TaggerConfig:
    cells_per_direction: int = 256
    dropout: float = 0.2
    mode: str = "ngram"
    gate_activation: str = "sigmoid"
    candidate_activation: str = "tanh"
    max_seq_len: int = 256

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.cells_per_direction < 1:
            raise ValueError("cells_per_direction must be >= 1")
        if self.mode not in ("unigram", "ngram"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.gate_activation != "sigmoid":
            raise ValueError("only sigmoid gates are supported")
        if self.candidate_activation not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown candidate activation {self.candidate_activation!r}")


@dataclass
class TrainHyper:
    epochs: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    seed: int = 0
    negative_ratio: float = 1.0  # pretraining: non-medical tokens per medical token


@dataclass
class TaggerParams:
    arrays: dict[str, np.ndarray]
    embeddings: EmbeddingTable
    seed: int = 0
    _lookup: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def cells(self) -> int:
        return self.arrays["fwd_U"].shape[1]

    @property
    def lookup(self) -> np.ndarray:
        if self._lookup is None:
            self._lookup = self.embeddings.lookup_table()
        return self._lookup

    def copy(self) -> "TaggerParams":
        return TaggerParams({k: v.copy() for k, v in self.arrays.items()}, self.embeddings, self.seed, self._lookup)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _act(kind):
    if kind == "tanh":
        return np.tanh, lambda y: 1.0 - y * y
    return sigmoid, lambda y: y * (1.0 - y)


def init_params(embeddings: EmbeddingTable, config: TaggerConfig, seed: int = 0) -> TaggerParams:
    rng = np.random.default_rng(seed)
    H, D = config.cells_per_direction, embeddings.dim
    scale = 1.0 / np.sqrt(H)
    arrays = {}
    for d in DIRECTIONS:
        arrays[f"{d}_W"] = rng.uniform(-scale, scale, size=(4 * H, D))
        arrays[f"{d}_U"] = rng.uniform(-scale, scale, size=(4 * H, H))
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0  # forget gate
        arrays[f"{d}_b"] = b
    arrays["head_w"] = rng.uniform(-scale, scale, size=2 * H)
    arrays["head_b"] = np.zeros(1)
    return TaggerParams(arrays, embeddings, seed)


def pad_batch(seqs: Sequence[np.ndarray], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    T = max(len(s) for s in seqs)
    ids = np.full((len(seqs), T), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    return ids, mask


def _lstm_forward(W, U, b, X, mask, reverse, cand):
    B, T, _ = X.shape
    H = U.shape[1]
    f_cand, _ = _act(cand)
    pre_x = X @ W.T + b
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    hs = np.zeros((B, T, H))
    steps = []
    for t in (range(T - 1, -1, -1) if reverse else range(T)):
        a = pre_x[:, t] + h @ U.T
        i = sigmoid(a[:, :H])
        f = sigmoid(a[:, H:2 * H])
        g = f_cand(a[:, 2 * H:3 * H])
        o = sigmoid(a[:, 3 * H:])
        c_new = f * c + i * g
        ac = f_cand(c_new)
        m = mask[:, t:t + 1]
        steps.append((t, h, c, i, f, g, o, ac))
        h = m * (o * ac)
        c = m * c_new
        hs[:, t] = h
    return hs, steps


def _lstm_backward(W, U, X, mask, dhs, steps, cand):
    _, d_cand = _act(cand)
    H = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0])
    dh_next = np.zeros((X.shape[0], H))
    dc_next = np.zeros((X.shape[0], H))
    for t, h_prev, c_prev, i, f, g, o, ac in reversed(steps):
        m = mask[:, t:t + 1]
        dh = m * (dhs[:, t] + dh_next)
        dc = m * dc_next + dh * o * d_cand(ac)
        da = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                dc * i * d_cand(g),
                dh * ac * o * (1.0 - o),
            ],
            axis=1,
        )
        dW += da.T @ X[:, t]
        dU += da.T @ h_prev
        db += da.sum(axis=0)
        dh_next = da @ U
        dc_next = dc * f
    return dW, dU, db


def _dropout_mask(shape, rate, rng):
    if rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def forward_batch(params: TaggerParams, config: TaggerConfig, ids: np.ndarray, mask: np.ndarray,
                  train_mode: bool = False, rng: np.random.Generator | None = None):
    """Per-token probabilities (B x T) plus the cache needed for backprop."""
    if ids.shape[1] > config.max_seq_len:
        raise SequenceTooLong(f"sequence length {ids.shape[1]} exceeds {config.max_seq_len}")
    A = params.arrays
    X = params.lookup[ids]
    cand = config.candidate_activation
    hf, steps_f = _lstm_forward(A["fwd_W"], A["fwd_U"], A["fwd_b"], X, mask, False, cand)
    hb, steps_b = _lstm_forward(A["bwd_W"], A["bwd_U"], A["bwd_b"], X, mask, True, cand)
    hcat = np.concatenate([hf, hb], axis=2)
    drop = None
    if train_mode:
        drop = _dropout_mask(hcat.shape, config.dropout, rng if rng is not None else np.random.default_rng())
    hd = hcat if drop is None else hcat * drop
    z = hd @ A["head_w"] + A["head_b"][0]
    p = np.clip(sigmoid(z), _OUT_EPS, 1.0 - _OUT_EPS)
    return p, (X, mask, steps_f, steps_b, drop, hd)


def forward(params: TaggerParams, config: TaggerConfig, token_ids: Sequence[int],
            train_mode: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    token_ids = np.asarray(token_ids, dtype=np.int64)
    if len(token_ids) == 0:
        raise ValueError("forward needs at least one token")
    if len(token_ids) > config.max_seq_len:
        raise SequenceTooLong(f"sequence length {len(token_ids)} exceeds {config.max_seq_len}")
    p, _ = forward_batch(params, config, token_ids[None, :], np.ones((1, len(token_ids))), train_mode, rng)
    return p[0]


def loss_and_grads(params: TaggerParams, config: TaggerConfig,
                   batch: Sequence[tuple[Sequence[int], Sequence[int]]],
                   train_mode: bool = False, rng: np.random.Generator | None = None):
    """Mean token BCE over the batch and gradients for every trainable array."""
    ids, mask = pad_batch([np.asarray(s, dtype=np.int64) for s, _ in batch], params.embeddings.pad_id)
    labels = np.zeros(mask.shape)
    for k, (_, y) in enumerate(batch):
        labels[k, :len(y)] = y
    p, (X, mask, steps_f, steps_b, drop, hd) = forward_batch(params, config, ids, mask, train_mode, rng)
    n = mask.sum()
    pc = np.clip(p, P_CLAMP, 1.0 - P_CLAMP)
    loss = -float(np.sum(mask * (labels * np.log(pc) + (1.0 - labels) * np.log(1.0 - pc)))) / n
    if not np.isfinite(loss):
        raise NonFiniteLoss(f"loss is {loss}")
    unclamped = (p > P_CLAMP) & (p < 1.0 - P_CLAMP)
    dz = mask * unclamped * (p - labels) / n
    A = params.arrays
    grads = {"head_w": np.einsum("bt,bth->h", dz, hd), "head_b": np.array([dz.sum()])}
    dh = dz[:, :, None] * A["head_w"]
    if drop is not None:
        dh = dh * drop
    H = params.cells
    cand = config.candidate_activation
    for name, steps, dhs in (("fwd", steps_f, dh[:, :, :H]), ("bwd", steps_b, dh[:, :, H:])):
        dW, dU, db = _lstm_backward(A[f"{name}_W"], A[f"{name}_U"], X, mask, dhs, steps, cand)
        grads[f"{name}_W"], grads[f"{name}_U"], grads[f"{name}_b"] = dW, dU, db
    return loss, grads


def adam_step(state: AdamState, params: TaggerParams, grads: dict[str, np.ndarray]) -> TaggerParams:
    state.step += 1
    t = state.step
    for k, g in grads.items():
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        m_hat = state.m[k] / (1.0 - state.beta1 ** t)
        v_hat = state.v[k] / (1.0 - state.beta2 ** t)
        params.arrays[k] = params.arrays[k] - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def _truncate(ids, labels, max_len):
    if len(ids) > max_len:
        log.warning("truncating sequence of %d tokens to %d", len(ids), max_len)
        return ids[:max_len], labels[:max_len]
    return ids, labels


def _as_mode(sequences, mode):
    if mode == "ngram":
        return sequences
    return [(ids[i:i + 1], labels[i:i + 1]) for ids, labels in sequences for i in range(len(ids))]


def train_sequences(params: TaggerParams, config: TaggerConfig,
                    sequences: Sequence[tuple[np.ndarray, Sequence[int]]], hyper: TrainHyper,
                    state: AdamState | None = None) -> list[float]:
    """Run ``hyper.epochs`` of minibatch Adam in place; returns the per-epoch mean loss."""
    rng = np.random.default_rng(hyper.seed)
    state = state or AdamState(lr=hyper.lr)
    seqs = [_truncate(np.asarray(ids), list(y), config.max_seq_len) for ids, y in sequences]
    seqs = [s for s in _as_mode(seqs, config.mode) if len(s[0])]
    trace = []
    for _ in range(hyper.epochs):
        order = rng.permutation(len(seqs))
        total, count = 0.0, 0
        for start in range(0, len(order), hyper.batch_size):
            batch = [seqs[j] for j in order[start:start + hyper.batch_size]]
            loss, grads = loss_and_grads(params, config, batch, train_mode=True, rng=rng)
            adam_step(state, params, grads)
            total += loss * len(batch)
            count += len(batch)
        trace.append(total / max(count, 1))
    return trace


def lexicon_sequences(lexicon: TermLexicon, embeddings: EmbeddingTable, negative_ratio: float,
                      rng: np.random.Generator):
    """One epoch of pretraining data: every medical term plus sampled non-medical terms."""
    medical = sorted(lexicon.medical_terms)
    non_medical = sorted(lexicon.non_medical_terms)
    n_pos_tokens = sum(len(t.split(" ")) for t in medical)
    target = int(round(negative_ratio * n_pos_tokens))
    picked, n_neg = [], 0
    for j in rng.permutation(len(non_medical)):
        if n_neg >= target:
            break
        picked.append(non_medical[j])
        n_neg += len(non_medical[j].split(" "))
    seqs = [(embeddings.ids(t.split(" ")), [1] * len(t.split(" "))) for t in medical]
    seqs += [(embeddings.ids(t.split(" ")), [0] * len(t.split(" "))) for t in picked]
    return [seqs[j] for j in rng.permutation(len(seqs))]


def pretrain(lexicon: TermLexicon, embeddings: EmbeddingTable, config: TaggerConfig,
             hyper: TrainHyper) -> tuple[TaggerParams, list[float]]:
    params = init_params(embeddings, config, hyper.seed)
    state = AdamState(lr=hyper.lr)
    rng = np.random.default_rng(hyper.seed + 1)
    trace = []
    for epoch in range(hyper.epochs):
        seqs = lexicon_sequences(lexicon, embeddings, hyper.negative_ratio, rng)
        one = TrainHyper(1, hyper.batch_size, hyper.lr, hyper.seed + 1000 * (epoch + 1))
        trace += train_sequences(params, config, seqs, one, state)
    log.info("pretrained %s tagger for %d epochs, final loss %.4f", config.mode, hyper.epochs, trace[-1])
    return params, trace


def message_sequences(conversations: Sequence[Conversation], embeddings: EmbeddingTable):
    return [
        (embeddings.ids(m.norms), list(m.gold))
        for c in conversations
        for m in c.patient_messages
        if m.gold is not None and m.tokens
    ]


def finetune(params: TaggerParams, conversations: Sequence[Conversation], config: TaggerConfig,
             hyper: TrainHyper) -> tuple[TaggerParams, list[float]]:
    if params.cells != config.cells_per_direction or params.arrays["fwd_W"].shape[1] != params.embeddings.dim:
        raise ValueError("parameters are not shape-compatible with the config")
    tuned = params.copy()
    seqs = message_sequences(conversations, params.embeddings)
    if not seqs:
        return tuned, []
    trace = train_sequences(tuned, config, seqs, hyper)
    return tuned, trace


def predict_ids(params: TaggerParams, config: TaggerConfig, seqs: Sequence[np.ndarray],
                batch_size: int = 64) -> list[np.ndarray]:
    """Inference for many sequences; long sequences are scored in max_seq_len chunks."""
    if config.mode == "unigram":
        flat = np.concatenate([np.asarray(s, dtype=np.int64) for s in seqs]) if seqs else np.zeros(0, np.int64)
        out = np.zeros(len(flat))
        for start in range(0, len(flat), 4096):
            chunk = flat[start:start + 4096]
            p, _ = forward_batch(params, config, chunk[:, None], np.ones((len(chunk), 1)))
            out[start:start + len(chunk)] = p[:, 0]
        return np.split(out, np.cumsum([len(s) for s in seqs])[:-1]) if seqs else []
    pieces = []
    for k, s in enumerate(seqs):
        for start in range(0, len(s), config.max_seq_len):
            pieces.append((k, np.asarray(s[start:start + config.max_seq_len], dtype=np.int64)))
    order = sorted(range(len(pieces)), key=lambda j: len(pieces[j][1]))
    scored: dict[int, np.ndarray] = {}
    for start in range(0, len(order), batch_size):
        idx = [j for j in order[start:start + batch_size] if len(pieces[j][1])]
        if not idx:
            continue
        ids, mask = pad_batch([pieces[j][1] for j in idx], params.embeddings.pad_id)
        p, _ = forward_batch(params, config, ids, mask)
        for row, j in enumerate(idx):
            scored[j] = p[row, :len(pieces[j][1])]
    out = [[] for _ in seqs]
    for j, (k, piece) in enumerate(pieces):
        out[k].append(scored.get(j, np.zeros(0)))
    return [np.concatenate(parts) if parts else np.zeros(0) for parts in out]


def predict(params: TaggerParams, config: TaggerConfig, message: Message) -> np.ndarray:
    if not message.tokens:
        return np.zeros(0)
    return predict_ids(params, config, [params.embeddings.ids(message.norms)])[0]


def predict_messages(params: TaggerParams, config: TaggerConfig, messages: Sequence[Message]) -> list[np.ndarray]:
    return predict_ids(params, config, [params.embeddings.ids(m.norms) for m in messages])


def _pack(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unpack(obj: dict) -> np.ndarray:
    return np.asarray(obj["data"], dtype=float).reshape(obj["shape"])


def save_checkpoint(params: TaggerParams, config: TaggerConfig, path: str | Path) -> None:
    emb = params.embeddings
    obj = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "seed": params.seed,
        "arrays": {k: _pack(v) for k, v in sorted(params.arrays.items())},
        "embeddings": {"words": emb.words, "matrix": _pack(emb.matrix), "oov": _pack(emb.oov_vector)},
    }
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[TaggerParams, TaggerConfig]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {obj.get('version')}")
    e = obj["embeddings"]
    emb = EmbeddingTable(e["words"], _unpack(e["matrix"]), _unpack(e["oov"]))
    arrays = {k: _unpack(v) for k, v in obj["arrays"].items()}
    return TaggerParams(arrays, emb, obj["seed"]), TaggerConfig(**obj["config"])
