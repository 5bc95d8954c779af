"""
Numpy building blocks with hand-written backward passes.

Parameters live in a flat dict name -> float64 array. Every forward returns (output, cache);
the matching backward takes the cache and the upstream gradient and returns the gradients
of its inputs plus a dict of parameter gradients keyed like the parameter dict.

Shapes use B for batch, L for sequence (view slots), d for model width, h for heads.
"""

import numpy as np


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))"""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_params(shapes: dict, seed: int) -> dict[str, np.ndarray]:
    """shapes: name -> (shape, fan_in), initialized in insertion order from one generator."""
    rng = np.random.default_rng(seed)
    return {name: init_uniform(rng, shape, fan_in) for name, (shape, fan_in) in shapes.items()}


def linear_shapes(prefix: str, n_in: int, n_out: int) -> dict:
    return {f"{prefix}.W": ((n_in, n_out), n_in), f"{prefix}.b": ((n_out,), n_in)}


def linear(params, prefix: str, x: np.ndarray):
    return x @ params[f"{prefix}.W"] + params[f"{prefix}.b"], x


def linear_backward(params, prefix: str, x: np.ndarray, dy: np.ndarray):
    W = params[f"{prefix}.W"]
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    grads = {f"{prefix}.W": x2.T @ dy2, f"{prefix}.b": dy2.sum(axis=0)}
    return dy @ W.T, grads


def tanh_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (1.0 - y * y)


def masked_softmax(scores: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Softmax over the last axis; mask (broadcastable, True = valid) sends scores to -inf."""
    if mask is None:
        mask = np.ones(scores.shape, dtype=bool)
    valid = np.broadcast_to(mask, scores.shape)
    if not valid.any(axis=-1).all():
        raise ValueError("attention query has every key masked; softmax is undefined")
    s = np.where(valid, scores, -np.inf)
    e = np.where(valid, np.exp(s - s.max(axis=-1, keepdims=True)), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(a: np.ndarray, da: np.ndarray) -> np.ndarray:
    return a * (da - (da * a).sum(axis=-1, keepdims=True))


def scaled_dot_product_attention(q, k, v, mask=None):
    """softmax(q k^T / sqrt(d_k)) v over the last two axes. Returns (output, weights)."""
    q, k, v = (np.asarray(x, dtype=np.float64) for x in (q, k, v))
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise ValueError(f"shape mismatch: q {q.shape}, k {k.shape}, v {v.shape}")
    scores = q @ np.swapaxes(k, -1, -2) / np.sqrt(q.shape[-1])
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)[..., None, :]
    weights = masked_softmax(scores, mask)
    return weights @ v, weights


def attention_shapes(prefix: str, d: int) -> dict:
    shapes = {}
    for name in ("q", "k", "v", "o"):
        shapes.update(linear_shapes(f"{prefix}.{name}", d, d))
    return shapes


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    B, L, d = x.shape
    return x.reshape(B, L, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    B, h, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, h * dh)


def multi_head_attention(params, prefix: str, xq: np.ndarray, xkv: np.ndarray,
                         mask: np.ndarray | None, heads: int):
    """
    xq   : (B, Lq, d) query inputs
    xkv  : (B, Lk, d) key/value inputs
    mask : (B, Lk) bool, True marks a valid key
    Returns (B, Lq, d) and a cache for multi_head_attention_backward.
    """
    d = xq.shape[-1]
    if d % heads:
        raise ValueError(f"width {d} is not divisible by {heads} heads")
    q = _split_heads(linear(params, f"{prefix}.q", xq)[0], heads)
    k = _split_heads(linear(params, f"{prefix}.k", xkv)[0], heads)
    v = _split_heads(linear(params, f"{prefix}.v", xkv)[0], heads)
    scale = 1.0 / np.sqrt(d // heads)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    m = None if mask is None else np.asarray(mask, dtype=bool)[:, None, None, :]
    a = masked_softmax(scores, m)
    ctx = _merge_heads(a @ v)
    out = linear(params, f"{prefix}.o", ctx)[0]
    cache = {"xq": xq, "xkv": xkv, "q": q, "k": k, "v": v, "a": a, "ctx": ctx,
             "scale": scale, "heads": heads}
    return out, cache


def multi_head_attention_backward(params, prefix: str, cache: dict, dout: np.ndarray):
    """Returns (dxq, dxkv, grads)."""
    heads, scale = cache["heads"], cache["scale"]
    q, k, v, a = cache["q"], cache["k"], cache["v"], cache["a"]
    dctx, grads = linear_backward(params, f"{prefix}.o", cache["ctx"], dout)
    dctx = _split_heads(dctx, heads)
    da = dctx @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ dctx
    ds = softmax_backward(a, da) * scale
    dq = ds @ k
    dk = ds.transpose(0, 1, 3, 2) @ q
    dxq, g = linear_backward(params, f"{prefix}.q", cache["xq"], _merge_heads(dq))
    grads.update(g)
    dxk, g = linear_backward(params, f"{prefix}.k", cache["xkv"], _merge_heads(dk))
    grads.update(g)
    dxv, g = linear_backward(params, f"{prefix}.v", cache["xkv"], _merge_heads(dv))
    grads.update(g)
    return dxq, dxk + dxv, grads


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    B = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -log_p[np.arange(B), labels].mean()
    dlogits = np.exp(log_p)
    dlogits[np.arange(B), labels] -= 1.0
    return float(loss), dlogits / B


def add_grads(total: dict, new: dict) -> dict:
    for name, g in new.items():
        if name in total:
            total[name] = total[name] + g
        else:
            total[name] = g
    return total
