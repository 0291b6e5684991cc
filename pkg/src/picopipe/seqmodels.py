"""Neural sequence layers with hand-written forward/backward passes.

Contents: the LSTM cell and unrolled sequence (with backprop through time),
the bidirectional encoder, character-level CNN and BiLSTM token encoders, and
the multi-width convolutional sentence classifier. Every trainable layer has
a `*_forward` returning a cache and a `*_backward` consuming it; gradients
are returned in dicts keyed like the parameter dicts so they feed straight
into the optimizer and the finite-difference checker.

Sequences are (T, dim) float64 arrays. Parameter naming: gate weights `W_i`,
`W_f`, `W_o`, `W_g` have shape (hidden, hidden + input) and act on the
concatenation [h_prev, x]; biases `b_*` have shape (hidden,).
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

import numpy as np

from .numerics import Params, sigmoid, tanh_v, xavier_uniform
from .rng import Rng

DEFAULT_HIDDEN = 100
CHAR_CNN_FILTERS = 30
CHAR_CNN_WIDTH = 3
CHAR_LSTM_HIDDEN = 25
SENTENCE_CNN_WIDTHS = (3, 4, 5)
SENTENCE_CNN_MAPS = 100
NUM_CLASSES = 4


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

def init_lstm_params(input_dim: int, hidden: int, rng: Rng, forget_bias: float = 1.0) -> Params:
    """Gate weights via Xavier-uniform, zero biases, forget bias at 1.0."""
    p: Params = {}
    for gate in ("i", "f", "o", "g"):
        p[f"W_{gate}"] = xavier_uniform((hidden, hidden + input_dim), rng)
        p[f"b_{gate}"] = np.zeros(hidden)
    p["b_f"] = np.full(hidden, forget_bias)
    return p


def lstm_cell_forward(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    params: Params,
    strict_output_gate: bool = False,
) -> Tuple[np.ndarray, np.ndarray, dict]:
    """One LSTM step; returns (h, c, cache).

    The output gate normally sees [h_prev, x] like the other gates. With
    `strict_output_gate` it instead computes sigmoid(W_o[:, :H] @ (h_prev + b_o)),
    a comparison mode for the reduced form that drops the input term.
    """
    hidden = h_prev.shape[0]
    z = np.concatenate([h_prev, x])
    if params["W_i"].shape != (hidden, z.shape[0]):
        raise ValueError(
            f"gate weight shape {params['W_i'].shape} incompatible with "
            f"hidden={hidden}, input={x.shape[0]}"
        )
    i = sigmoid(params["W_i"] @ z + params["b_i"])
    f = sigmoid(params["W_f"] @ z + params["b_f"])
    if strict_output_gate:
        o = sigmoid(params["W_o"][:, :hidden] @ (h_prev + params["b_o"]))
    else:
        o = sigmoid(params["W_o"] @ z + params["b_o"])
    g = tanh_v(params["W_g"] @ z + params["b_g"])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    cache = {"z": z, "i": i, "f": f, "o": o, "g": g, "c_prev": c_prev, "tc": tc,
             "h_prev": h_prev, "strict": strict_output_gate}
    return h, c, cache


def lstm_cell_step(
    x: np.ndarray,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
    params: Params,
    strict_output_gate: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """Inference-only view of one LSTM step: (h_t, c_t)."""
    h, c, _ = lstm_cell_forward(x, h_prev, c_prev, params, strict_output_gate)
    return h, c


def lstm_cell_backward(
    dh: np.ndarray,
    dc: np.ndarray,
    cache: dict,
    params: Params,
    grads: Params,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backprop one step. Accumulates into `grads`; returns (dx, dh_prev, dc_prev)."""
    z, i, f, o, g = cache["z"], cache["i"], cache["f"], cache["o"], cache["g"]
    tc = cache["tc"]
    hidden = i.shape[0]

    do = dh * tc
    dcell = dc + dh * o * (1.0 - tc * tc)
    di = dcell * g
    df = dcell * cache["c_prev"]
    dg = dcell * i
    dc_prev = dcell * f

    dpre_i = di * i * (1.0 - i)
    dpre_f = df * f * (1.0 - f)
    dpre_o = do * o * (1.0 - o)
    dpre_g = dg * (1.0 - g * g)

    dz = np.zeros_like(z)
    for gate, dpre in (("i", dpre_i), ("f", dpre_f), ("g", dpre_g)):
        grads[f"W_{gate}"] += np.outer(dpre, z)
        grads[f"b_{gate}"] += dpre
        dz += params[f"W_{gate}"].T @ dpre

    if cache["strict"]:
        shifted = cache["h_prev"] + params["b_o"]
        w_oh = params["W_o"][:, :hidden]
        grads["W_o"][:, :hidden] += np.outer(dpre_o, shifted)
        grads["b_o"] += w_oh.T @ dpre_o
        dz[:hidden] += w_oh.T @ dpre_o
    else:
        grads["W_o"] += np.outer(dpre_o, z)
        grads["b_o"] += dpre_o
        dz += params["W_o"].T @ dpre_o

    return dz[hidden:], dz[:hidden], dc_prev


def zero_grads_like(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# Unrolled sequence and bidirectional encoder
# ---------------------------------------------------------------------------

def lstm_sequence_forward(
    xs: np.ndarray, params: Params, strict_output_gate: bool = False
) -> Tuple[np.ndarray, np.ndarray, list]:
    """Run the cell over xs (T, input); returns (hs (T, H), final c, caches)."""
    T = xs.shape[0]
    hidden = params["b_i"].shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    hs = np.empty((T, hidden))
    caches = []
    for t in range(T):
        h, c, cache = lstm_cell_forward(xs[t], h, c, params, strict_output_gate)
        hs[t] = h
        caches.append(cache)
    return hs, c, caches


def lstm_sequence_backward(
    dhs: np.ndarray | None,
    caches: list,
    params: Params,
    d_final_h: np.ndarray | None = None,
    d_final_c: np.ndarray | None = None,
) -> Tuple[np.ndarray, Params]:
    """BPTT over a cached forward run; returns (dxs, parameter grads)."""
    T = len(caches)
    hidden = params["b_i"].shape[0]
    input_dim = params["W_i"].shape[1] - hidden
    grads = zero_grads_like(params)
    dxs = np.zeros((T, input_dim))
    dh = np.zeros(hidden) if d_final_h is None else d_final_h.copy()
    dc = np.zeros(hidden) if d_final_c is None else d_final_c.copy()
    for t in range(T - 1, -1, -1):
        if dhs is not None:
            dh = dh + dhs[t]
        dxs[t], dh, dc = lstm_cell_backward(dh, dc, caches[t], params, grads)
    return dxs, grads


def bilstm_forward(xs: np.ndarray, fwd: Params, bwd: Params) -> Tuple[np.ndarray, dict]:
    """Bidirectional encoding: out[t] = [forward h_t, backward h_t]."""
    if xs.shape[0] == 0:
        raise ValueError("cannot encode an empty sequence")
    hs_f, _, caches_f = lstm_sequence_forward(xs, fwd)
    hs_b_rev, _, caches_b = lstm_sequence_forward(xs[::-1], bwd)
    out = np.concatenate([hs_f, hs_b_rev[::-1]], axis=1)
    return out, {"caches_f": caches_f, "caches_b": caches_b, "hidden": hs_f.shape[1]}


def bilstm_encode(sequence, fwd: Params, bwd: Params) -> np.ndarray:
    xs = np.asarray(sequence, dtype=np.float64)
    out, _ = bilstm_forward(xs, fwd, bwd)
    return out


def bilstm_backward(
    dout: np.ndarray, cache: dict, fwd: Params, bwd: Params
) -> Tuple[np.ndarray, Params, Params]:
    hidden = cache["hidden"]
    dxs_f, grads_f = lstm_sequence_backward(dout[:, :hidden], cache["caches_f"], fwd)
    dxs_b, grads_b = lstm_sequence_backward(dout[::-1, hidden:], cache["caches_b"], bwd)
    return dxs_f + dxs_b[::-1], grads_f, grads_b


def bilstm_final_forward(xs: np.ndarray, fwd: Params, bwd: Params) -> Tuple[np.ndarray, dict]:
    """[final forward state, final backward state], the classifier summary."""
    if xs.shape[0] == 0:
        raise ValueError("cannot encode an empty sequence")
    hs_f, _, caches_f = lstm_sequence_forward(xs, fwd)
    hs_b, _, caches_b = lstm_sequence_forward(xs[::-1], bwd)
    out = np.concatenate([hs_f[-1], hs_b[-1]])
    return out, {"caches_f": caches_f, "caches_b": caches_b, "hidden": hs_f.shape[1]}


def bilstm_final_backward(
    dout: np.ndarray, cache: dict, fwd: Params, bwd: Params
) -> Tuple[np.ndarray, Params, Params]:
    hidden = cache["hidden"]
    dxs_f, grads_f = lstm_sequence_backward(None, cache["caches_f"], fwd, d_final_h=dout[:hidden])
    dxs_b, grads_b = lstm_sequence_backward(None, cache["caches_b"], bwd, d_final_h=dout[hidden:])
    return dxs_f + dxs_b[::-1], grads_f, grads_b


# ---------------------------------------------------------------------------
# Character encoders
# ---------------------------------------------------------------------------

def init_char_cnn_params(char_vocab: int, char_dim: int, rng: Rng,
                         n_filters: int = CHAR_CNN_FILTERS, width: int = CHAR_CNN_WIDTH) -> Params:
    return {
        "emb": xavier_uniform((char_vocab, char_dim), rng),
        "filters": xavier_uniform((n_filters, width * char_dim), rng),
        "b": np.zeros(n_filters),
    }


def _conv_windows(emb_seq: np.ndarray, width: int) -> np.ndarray:
    """Stack sliding windows of `width` rows, flattened; input is pre-padded."""
    length, dim = emb_seq.shape
    n_pos = length - width + 1
    windows = np.empty((n_pos, width * dim))
    for p in range(n_pos):
        windows[p] = emb_seq[p : p + width].reshape(-1)
    return windows


def char_cnn_forward(char_ids: Sequence[int], params: Params) -> Tuple[np.ndarray, dict]:
    """Embed characters, convolve one filter bank, tanh, max-pool over time.

    Tokens shorter than the filter width are padded with zero vectors (a
    reserved, non-trainable pad).
    """
    if len(char_ids) == 0:
        raise ValueError("cannot encode an empty token")
    ids = np.asarray(char_ids, dtype=np.int64)
    emb = params["emb"][ids]
    width = params["filters"].shape[1] // params["emb"].shape[1]
    if emb.shape[0] < width:
        pad = np.zeros((width - emb.shape[0], emb.shape[1]))
        padded = np.vstack([emb, pad])
    else:
        padded = emb
    windows = _conv_windows(padded, width)
    pre = windows @ params["filters"].T + params["b"]
    act = np.tanh(pre)
    arg = np.argmax(act, axis=0)
    out = act[arg, np.arange(act.shape[1])]
    cache = {"ids": ids, "windows": windows, "act": act, "arg": arg,
             "width": width, "true_len": emb.shape[0]}
    return out, cache


def char_cnn_backward(dout: np.ndarray, cache: dict, params: Params) -> Params:
    ids, windows, act, arg = cache["ids"], cache["windows"], cache["act"], cache["arg"]
    width = cache["width"]
    char_dim = params["emb"].shape[1]
    n_pos, n_filt = act.shape

    dact = np.zeros_like(act)
    dact[arg, np.arange(n_filt)] = dout
    dpre = dact * (1.0 - act * act)

    grads = zero_grads_like(params)
    grads["filters"] += dpre.T @ windows
    grads["b"] += dpre.sum(axis=0)

    dwindows = dpre @ params["filters"]
    padded_len = n_pos + width - 1
    dpadded = np.zeros((padded_len, char_dim))
    for p in range(n_pos):
        dpadded[p : p + width] += dwindows[p].reshape(width, char_dim)
    demb_rows = dpadded[: cache["true_len"]]  # gradients on pad rows are dropped
    np.add.at(grads["emb"], ids, demb_rows)
    return grads


def init_char_lstm_params(char_vocab: int, char_dim: int, rng: Rng,
                          hidden: int = CHAR_LSTM_HIDDEN) -> Params:
    p: Params = {"emb": xavier_uniform((char_vocab, char_dim), rng)}
    for k, v in init_lstm_params(char_dim, hidden, rng.split("fwd")).items():
        p[f"fwd.{k}"] = v
    for k, v in init_lstm_params(char_dim, hidden, rng.split("bwd")).items():
        p[f"bwd.{k}"] = v
    return p


def _subparams(params: Params, prefix: str) -> Params:
    return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}


def char_lstm_forward(char_ids: Sequence[int], params: Params) -> Tuple[np.ndarray, dict]:
    """[final forward state, final backward state] over character embeddings."""
    if len(char_ids) == 0:
        raise ValueError("cannot encode an empty token")
    ids = np.asarray(char_ids, dtype=np.int64)
    emb = params["emb"][ids]
    fwd = _subparams(params, "fwd.")
    bwd = _subparams(params, "bwd.")
    out, cache = bilstm_final_forward(emb, fwd, bwd)
    cache["ids"] = ids
    return out, cache


def char_lstm_backward(dout: np.ndarray, cache: dict, params: Params) -> Params:
    fwd = _subparams(params, "fwd.")
    bwd = _subparams(params, "bwd.")
    demb, grads_f, grads_b = bilstm_final_backward(dout, cache, fwd, bwd)
    grads = zero_grads_like(params)
    for k, v in grads_f.items():
        grads[f"fwd.{k}"] += v
    for k, v in grads_b.items():
        grads[f"bwd.{k}"] += v
    np.add.at(grads["emb"], cache["ids"], demb)
    return grads


def char_encode(char_ids: Sequence[int], params: Params, variant: str) -> np.ndarray:
    """Token vector from characters: `cnn` -> n_filters dims, `lstm` -> 2*hidden."""
    if variant == "cnn":
        out, _ = char_cnn_forward(char_ids, params)
    elif variant == "lstm":
        out, _ = char_lstm_forward(char_ids, params)
    else:
        raise ValueError(f"unknown char encoder variant {variant!r}")
    return out


# ---------------------------------------------------------------------------
# Sentence-level convolutional classifier
# ---------------------------------------------------------------------------

def init_sentence_cnn_params(word_dim: int, rng: Rng,
                             widths: Tuple[int, ...] = SENTENCE_CNN_WIDTHS,
                             maps: int = SENTENCE_CNN_MAPS,
                             n_classes: int = NUM_CLASSES) -> Params:
    p: Params = {}
    for w in widths:
        p[f"filters{w}"] = xavier_uniform((maps, w * word_dim), rng)
        p[f"bias{w}"] = np.zeros(maps)
    p["W_out"] = xavier_uniform((n_classes, maps * len(widths)), rng)
    p["b_out"] = np.zeros(n_classes)
    return p


def _cnn_widths(params: Params) -> List[int]:
    return sorted(int(k[len("filters"):]) for k in params if k.startswith("filters"))


def sentence_cnn_forward(word_vecs: np.ndarray, params: Params) -> Tuple[np.ndarray, dict]:
    """Class logits for one sentence of word vectors (T, word_dim).

    Sentences shorter than the widest filter are padded with zero vectors
    (the reserved zero-embedding pad).
    """
    xs = np.asarray(word_vecs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise ValueError("sentence must be a non-empty (T, dim) array")
    widths = _cnn_widths(params)
    max_w = max(widths)
    true_len = xs.shape[0]
    if true_len < max_w:
        xs = np.vstack([xs, np.zeros((max_w - true_len, xs.shape[1]))])
    feats = []
    per_width = {}
    for w in widths:
        windows = _conv_windows(xs, w)
        pre = windows @ params[f"filters{w}"].T + params[f"bias{w}"]
        act = np.tanh(pre)
        arg = np.argmax(act, axis=0)
        pooled = act[arg, np.arange(act.shape[1])]
        feats.append(pooled)
        per_width[w] = {"windows": windows, "act": act, "arg": arg}
    feat = np.concatenate(feats)
    logits = params["W_out"] @ feat + params["b_out"]
    cache = {"per_width": per_width, "feat": feat, "padded": xs,
             "true_len": true_len, "widths": widths}
    return logits, cache


def sentence_cnn_logits(word_vecs, params: Params) -> np.ndarray:
    logits, _ = sentence_cnn_forward(np.asarray(word_vecs, dtype=np.float64), params)
    return logits


def sentence_cnn_backward(dlogits: np.ndarray, cache: dict, params: Params) -> Tuple[np.ndarray, Params]:
    """Returns (d word_vecs (T, dim) for the unpadded sentence, param grads)."""
    grads = zero_grads_like(params)
    feat = cache["feat"]
    grads["W_out"] += np.outer(dlogits, feat)
    grads["b_out"] += dlogits
    dfeat = params["W_out"].T @ dlogits

    xs = cache["padded"]
    dxs = np.zeros_like(xs)
    offset = 0
    word_dim = xs.shape[1]
    for w in cache["widths"]:
        maps = params[f"bias{w}"].shape[0]
        dpool = dfeat[offset : offset + maps]
        offset += maps
        pw = cache["per_width"][w]
        act, arg, windows = pw["act"], pw["arg"], pw["windows"]
        dact = np.zeros_like(act)
        dact[arg, np.arange(maps)] = dpool
        dpre = dact * (1.0 - act * act)
        grads[f"filters{w}"] += dpre.T @ windows
        grads[f"bias{w}"] += dpre.sum(axis=0)
        dwindows = dpre @ params[f"filters{w}"]
        for p in range(windows.shape[0]):
            dxs[p : p + w] += dwindows[p].reshape(w, word_dim)
    return dxs[: cache["true_len"]], grads
