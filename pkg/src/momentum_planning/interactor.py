"""Numeric blocks that refine a selected planning query against history.

Everything here is plain float64 numpy, written so a forward pass is a
composition of small, separately testable stages:

    score_gate -> lstm mixing (per candidate row) -> cross attention -> plan head

The weight container is a named map of dense matrices, serialized to JSON
with exact float round-trip.  ``trajectory_sq_loss_and_grads`` implements a
hand-derived reverse pass for the squared-norm loss over the produced
trajectories, returning a gradient for every weight entry; it exists so the
forward math can be verified against finite differences.

Shape conventions (D = query width, K = candidates, N = waypoints):
    query row        (D,)
    batch rows       (K, D)
    lstm weights     W_ih, W_hh: (4D, D), bias (4D,), gate order i, f, g, o
    head outputs     trajectories (K, N, 2), score logits (K,)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInputError, ShapeError

WEIGHT_NAMES = (
    "mlp.W",
    "mlp.b",
    "lstm.W_ih",
    "lstm.W_hh",
    "lstm.b",
    "attn.W_q",
    "attn.W_k",
    "attn.W_v",
    "attn.W_o",
    "head.W_traj",
    "head.b_traj",
    "head.W_score",
    "head.b_score",
)

_ACTIVATIONS = ("identity", "relu", "tanh")


def sigmoid(x):
    # tanh form stays finite for any input magnitude
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def softmax(logits) -> np.ndarray:
    """Overflow-safe softmax over a 1-D logit vector."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise ShapeError(f"softmax expects a non-empty 1-D vector, got shape {z.shape}")
    e = np.exp(z - z.max())
    return e / e.sum()


def _apply_activation(pre, activation):
    if activation == "identity":
        return pre
    if activation == "relu":
        return np.maximum(pre, 0.0)
    if activation == "tanh":
        return np.tanh(pre)
    raise ShapeError(f"unknown activation {activation!r}; pick one of {_ACTIVATIONS}")


@dataclass(frozen=True)
class QueryBatch:
    """K query rows with their pre-activation scores."""

    rows: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ShapeError(f"rows must be (K, D) with K >= 1, got {rows.shape}")
        if len(scores) != rows.shape[0]:
            raise ShapeError(f"{rows.shape[0]} rows but {len(scores)} scores")
        if not np.isfinite(rows).all():
            raise ShapeError("query rows must be finite")
        if np.isnan(scores).any():
            raise ShapeError("scores must not be NaN")
        rows.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "scores", scores)

    @property
    def k(self) -> int:
        return int(self.rows.shape[0])

    @property
    def width(self) -> int:
        return int(self.rows.shape[1])


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.float64).reshape(-1)
        c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        if h.shape != c.shape:
            raise ShapeError(f"h and c must match, got {h.shape} vs {c.shape}")
        h.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c", c)

    @staticmethod
    def zeros(width: int) -> "LstmState":
        return LstmState(np.zeros(width), np.zeros(width))


class WeightBundle:
    """Named dense weights for the full refinement stack."""

    def __init__(self, tensors: dict):
        missing = [n for n in WEIGHT_NAMES if n not in tensors]
        extra = [n for n in tensors if n not in WEIGHT_NAMES]
        if missing or extra:
            raise ShapeError(f"weight names off: missing {missing}, unexpected {extra}")
        self._tensors = {}
        for name in WEIGHT_NAMES:
            arr = np.asarray(tensors[name], dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ShapeError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            self._tensors[name] = arr
        self._validate_shapes()

    def _validate_shapes(self):
        d = self._tensors["mlp.W"].shape[0]
        k = self._tensors["head.W_score"].shape[0]
        expected = {
            "mlp.W": (d, d),
            "mlp.b": (d,),
            "lstm.W_ih": (4 * d, d),
            "lstm.W_hh": (4 * d, d),
            "lstm.b": (4 * d,),
            "attn.W_q": (d, d),
            "attn.W_k": (d, d),
            "attn.W_v": (d, d),
            "attn.W_o": (d, d),
            "head.W_score": (k, 2 * d),
            "head.b_score": (k,),
        }
        for name, shape in expected.items():
            if self._tensors[name].shape != shape:
                raise ShapeError(
                    f"{name} must have shape {shape}, got {self._tensors[name].shape}"
                )
        wt = self._tensors["head.W_traj"]
        if wt.ndim != 2 or wt.shape[1] != 2 * d or wt.shape[0] % (2 * k) != 0:
            raise ShapeError(
                f"head.W_traj must be (K*N*2, {2 * d}) with K={k}, got {wt.shape}"
            )
        if self._tensors["head.b_traj"].shape != (wt.shape[0],):
            raise ShapeError("head.b_traj length must match head.W_traj rows")

    @property
    def d_q(self) -> int:
        return int(self._tensors["mlp.W"].shape[0])

    @property
    def k(self) -> int:
        return int(self._tensors["head.W_score"].shape[0])

    @property
    def n_t(self) -> int:
        return int(self._tensors["head.W_traj"].shape[0] // (2 * self.k))

    def get(self, name: str) -> np.ndarray:
        if name not in self._tensors:
            raise ShapeError(f"unknown weight {name!r}")
        return self._tensors[name]

    def names(self):
        return tuple(WEIGHT_NAMES)

    def with_tensor(self, name: str, array) -> "WeightBundle":
        tensors = dict(self._tensors)
        tensors[name] = np.asarray(array, dtype=np.float64)
        return WeightBundle(tensors)

    def __eq__(self, other):
        if not isinstance(other, WeightBundle):
            return NotImplemented
        return all(np.array_equal(self._tensors[n], other._tensors[n]) for n in WEIGHT_NAMES)

    @staticmethod
    def seeded(d_q: int, k: int, n_t: int, seed: int) -> "WeightBundle":
        """Uniform(-1/sqrt(D), +1/sqrt(D)) init over every entry."""
        if d_q < 1 or k < 1 or n_t < 1:
            raise ShapeError(f"dimensions must be positive, got {(d_q, k, n_t)}")
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(d_q)
        shapes = {
            "mlp.W": (d_q, d_q),
            "mlp.b": (d_q,),
            "lstm.W_ih": (4 * d_q, d_q),
            "lstm.W_hh": (4 * d_q, d_q),
            "lstm.b": (4 * d_q,),
            "attn.W_q": (d_q, d_q),
            "attn.W_k": (d_q, d_q),
            "attn.W_v": (d_q, d_q),
            "attn.W_o": (d_q, d_q),
            "head.W_traj": (k * n_t * 2, 2 * d_q),
            "head.b_traj": (k * n_t * 2,),
            "head.W_score": (k, 2 * d_q),
            "head.b_score": (k,),
        }
        tensors = {
            name: rng.uniform(-bound, bound, size=shapes[name]) for name in WEIGHT_NAMES
        }
        return WeightBundle(tensors)

    def save(self, path) -> None:
        payload = {
            name: {"shape": list(arr.shape), "data": arr.reshape(-1).tolist()}
            for name, arr in self._tensors.items()
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @staticmethod
    def load(path) -> "WeightBundle":
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        tensors = {}
        for name, rec in payload.items():
            if not isinstance(rec, dict) or "shape" not in rec or "data" not in rec:
                raise ShapeError(f"weight record {name!r} must carry 'shape' and 'data'")
            arr = np.asarray(rec["data"], dtype=np.float64).reshape(rec["shape"])
            tensors[name] = arr
        return WeightBundle(tensors)


# ---------------------------------------------------------------------------
# forward stages


def score_gate(batch: QueryBatch, weights: WeightBundle, activation: str = "identity") -> np.ndarray:
    """Gate each query row by its score confidence.

    Returns (K, D): sigmoid(score_k) * act(W row_k + b).
    """
    w, b = weights.get("mlp.W"), weights.get("mlp.b")
    if batch.width != weights.d_q:
        raise ShapeError(f"row width {batch.width} != weight width {weights.d_q}")
    pre = batch.rows @ w.T + b
    return sigmoid(batch.scores)[:, None] * _apply_activation(pre, activation)


def _lstm_gates(x, h, c, w_ih, w_hh, b):
    # returns every intermediate; gate order along the 4D axis is i, f, g, o
    a = w_ih @ x + w_hh @ h + b
    d = len(b) // 4
    i = sigmoid(a[:d])
    f = sigmoid(a[d : 2 * d])
    g = np.tanh(a[2 * d : 3 * d])
    o = sigmoid(a[3 * d :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return i, f, g, o, c_new, h_new


def lstm_step(x, state: LstmState, weights: WeightBundle):
    """One cell update for a single row; returns (h_new, new state)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if len(x) != weights.d_q or len(state.h) != weights.d_q:
        raise ShapeError(
            f"lstm width mismatch: x {len(x)}, h {len(state.h)}, weights {weights.d_q}"
        )
    *_, c_new, h_new = _lstm_gates(
        x, state.h, state.c, weights.get("lstm.W_ih"), weights.get("lstm.W_hh"), weights.get("lstm.b")
    )
    return h_new, LstmState(h_new, c_new)


def mix_history(
    history: QueryBatch | Sequence[QueryBatch],
    weights: WeightBundle,
    activation: str = "identity",
) -> np.ndarray:
    """Run gated history rows through the cell, one candidate at a time.

    ``history`` may be a single batch or an oldest-first sequence of
    batches; each candidate row starts from the zero state and consumes its
    row from every step in order.  Returns the final hidden rows (K, D).
    """
    steps = [history] if isinstance(history, QueryBatch) else list(history)
    if not steps:
        raise EmptyInputError("history must contain at least one query batch")
    k, d = steps[0].k, steps[0].width
    for step in steps:
        if step.k != k or step.width != d:
            raise ShapeError("all history batches must share K and D")
    gated = [score_gate(step, weights, activation) for step in steps]
    out = np.zeros((k, d))
    for row in range(k):
        state = LstmState.zeros(d)
        for g in gated:
            h, state = lstm_step(g[row], state, weights)
        out[row] = h
    return out


def attention_weights(query, keys, weights: WeightBundle) -> np.ndarray:
    """Normalized attention distribution of one query over K key rows."""
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    kk = np.asarray(keys, dtype=np.float64)
    if kk.ndim != 2 or kk.shape[1] != len(q):
        raise ShapeError(f"keys must be (K, {len(q)}), got {kk.shape}")
    if kk.shape[0] == 0:
        raise EmptyInputError("attention needs at least one key row")
    qp = weights.get("attn.W_q") @ q
    kp = kk @ weights.get("attn.W_k").T
    logits = kp @ qp / math.sqrt(len(q))
    return softmax(logits)


def cross_attention(query, keys, values, weights: WeightBundle) -> np.ndarray:
    """Single-head scaled dot-product attention; returns the refined query."""
    vv = np.asarray(values, dtype=np.float64)
    kk = np.asarray(keys, dtype=np.float64)
    if vv.shape != kk.shape:
        raise ShapeError(f"keys {kk.shape} and values {vv.shape} must match")
    w = attention_weights(query, kk, weights)
    vp = vv @ weights.get("attn.W_v").T
    ctx = w @ vp
    return weights.get("attn.W_o") @ ctx


def plan_head(query, instance_features, weights: WeightBundle):
    """Decode K trajectories and score logits from the refined query.

    Returns (trajectories (K, N, 2), score_logits (K,)).
    """
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    feats = np.asarray(instance_features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != len(q):
        raise ShapeError(f"features must be (M, {len(q)}), got {feats.shape}")
    if feats.shape[0] == 0:
        raise EmptyInputError("plan head needs at least one instance feature row")
    z = np.concatenate([q, feats.mean(axis=0)])
    flat = weights.get("head.W_traj") @ z + weights.get("head.b_traj")
    scores = weights.get("head.W_score") @ z + weights.get("head.b_score")
    k, n = weights.k, weights.n_t
    return flat.reshape(k, n, 2), scores


def mpi_forward(
    selected_query,
    history: QueryBatch | Sequence[QueryBatch],
    instance_features,
    weights: WeightBundle,
    activation: str = "identity",
):
    """Full refinement stack; bit-identical to composing the stages by hand."""
    mixed = mix_history(history, weights, activation)
    refined = cross_attention(selected_query, mixed, mixed, weights)
    return plan_head(refined, instance_features, weights)


# ---------------------------------------------------------------------------
# hand-derived reverse pass


def trajectory_sq_loss_and_grads(
    selected_query,
    history: QueryBatch | Sequence[QueryBatch],
    instance_features,
    weights: WeightBundle,
    activation: str = "identity",
):
    """Loss = sum of squares of every produced waypoint offset, plus the
    analytic gradient for each weight tensor.

    The forward pass is recomputed here stage by stage so every
    intermediate needed by the chain rule is cached; the math matches
    :func:`mpi_forward` exactly.
    """
    steps = [history] if isinstance(history, QueryBatch) else list(history)
    if not steps:
        raise EmptyInputError("history must contain at least one query batch")
    q_sel = np.asarray(selected_query, dtype=np.float64).reshape(-1)
    feats = np.asarray(instance_features, dtype=np.float64)
    d = weights.d_q
    k_rows = steps[0].k
    w_m, b_m = weights.get("mlp.W"), weights.get("mlp.b")
    w_ih, w_hh, b_l = weights.get("lstm.W_ih"), weights.get("lstm.W_hh"), weights.get("lstm.b")
    w_q, w_k, w_v, w_o = (
        weights.get("attn.W_q"),
        weights.get("attn.W_k"),
        weights.get("attn.W_v"),
        weights.get("attn.W_o"),
    )
    w_t, b_t = weights.get("head.W_traj"), weights.get("head.b_traj")

    # forward, caching per-step gate values
    pres, acts, gates_in = [], [], []
    for step in steps:
        pre = step.rows @ w_m.T + b_m
        act_out = _apply_activation(pre, activation)
        gated = sigmoid(step.scores)[:, None] * act_out
        pres.append(pre)
        acts.append(act_out)
        gates_in.append(gated)

    n_steps = len(steps)
    i_c = np.zeros((n_steps, k_rows, d))
    f_c = np.zeros_like(i_c)
    g_c = np.zeros_like(i_c)
    o_c = np.zeros_like(i_c)
    c_c = np.zeros_like(i_c)
    h_c = np.zeros((n_steps + 1, k_rows, d))  # h_c[0] is the zero init
    c_prevs = np.zeros_like(i_c)
    for row in range(k_rows):
        h, c = np.zeros(d), np.zeros(d)
        for b in range(n_steps):
            i, f, g, o, c_new, h_new = _lstm_gates(gates_in[b][row], h, c, w_ih, w_hh, b_l)
            i_c[b, row], f_c[b, row], g_c[b, row], o_c[b, row] = i, f, g, o
            c_prevs[b, row] = c
            c_c[b, row] = c_new
            h_c[b + 1, row] = h_new
            h, c = h_new, c_new
    mixed = h_c[n_steps]

    qp = w_q @ q_sel
    kp = mixed @ w_k.T
    vp = mixed @ w_v.T
    logits = kp @ qp / math.sqrt(d)
    w_att = softmax(logits)
    ctx = w_att @ vp
    att = w_o @ ctx

    fbar = feats.mean(axis=0)
    z = np.concatenate([att, fbar])
    y = w_t @ z + b_t
    loss = float(y @ y)

    # reverse pass
    grads = {name: np.zeros_like(weights.get(name)) for name in WEIGHT_NAMES}
    dy = 2.0 * y
    grads["head.W_traj"] = np.outer(dy, z)
    grads["head.b_traj"] = dy.copy()
    # score logits never touch the loss; their grads stay zero
    dz = w_t.T @ dy
    datt = dz[:d]

    grads["attn.W_o"] = np.outer(datt, ctx)
    dctx = w_o.T @ datt
    dw_att = vp @ dctx
    dvp = np.outer(w_att, dctx)
    dlogits = w_att * (dw_att - w_att @ dw_att)
    dqp = (kp.T @ dlogits) / math.sqrt(d)
    dkp = np.outer(dlogits, qp) / math.sqrt(d)
    grads["attn.W_q"] = np.outer(dqp, q_sel)
    grads["attn.W_k"] = dkp.T @ mixed
    grads["attn.W_v"] = dvp.T @ mixed
    dmixed = dkp @ w_k + dvp @ w_v

    dgates_in = [np.zeros((k_rows, d)) for _ in range(n_steps)]
    for row in range(k_rows):
        dh = dmixed[row]
        dc = np.zeros(d)
        for b in range(n_steps - 1, -1, -1):
            i, f, g, o = i_c[b, row], f_c[b, row], g_c[b, row], o_c[b, row]
            tc = np.tanh(c_c[b, row])
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prevs[b, row]
            da = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    dg * (1.0 - g * g),
                    do * o * (1.0 - o),
                ]
            )
            grads["lstm.W_ih"] += np.outer(da, gates_in[b][row])
            grads["lstm.W_hh"] += np.outer(da, h_c[b, row])
            grads["lstm.b"] += da
            dgates_in[b][row] = w_ih.T @ da
            dh = w_hh.T @ da
            dc = dc * f

    for b, step in enumerate(steps):
        d_act = dgates_in[b] * sigmoid(step.scores)[:, None]
        if activation == "identity":
            dpre = d_act
        elif activation == "relu":
            dpre = d_act * (pres[b] > 0.0)
        else:  # tanh
            dpre = d_act * (1.0 - acts[b] * acts[b])
        grads["mlp.W"] += dpre.T @ step.rows
        grads["mlp.b"] += dpre.sum(axis=0)

    # score-head tensors never touch this loss; their grads stay zero
    return loss, grads
