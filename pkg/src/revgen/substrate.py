"""Neural building blocks shared by the three decoders.

Everything is built from the autodiff ops: stacked GRU cells (update /
reset gates + candidate blend), the three-way context attention used by
every decoder (a learned row vector scores tanh(W1 [query; context])
for each of user/item/rating), a one-hidden-layer MLP, and Adam with
global-norm gradient clipping.

Parameters are initialized uniform(-0.08, 0.08); biases start at zero.
Dropout applies only to non-recurrent connections (layer inputs and
pre-output vectors), never to the recurrent state path.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import (affine, affine2, concat, dropout, lerp, mul,
                       sigmoid, softmax, tanh, weighted_sum)

INIT_SCALE = 0.08


def init_matrix(rng, shape, dtype):
    return ad.param(rng.uniform(-INIT_SCALE, INIT_SCALE,
                                size=shape).astype(dtype))


def init_zeros(shape, dtype):
    return ad.param(np.zeros(shape, dtype=dtype))


def softmax_xent(logits, target):
    """Stable softmax + cross-entropy; see autodiff.xent_logits."""
    return ad.xent_logits(logits, target)


class StackedGru:
    """Multi-layer GRU; layer l feeds layer l+1.

    Cell: z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br),
    hc = tanh(Wh x + Uh (r*h) + bh), h' = (1-z)*h + z*hc.
    """

    def __init__(self, prefix, input_dim, hidden_dim, num_layers, rng,
                 dtype=np.float64):
        self.prefix = prefix
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.num_layers = num_layers
        self.dtype = dtype
        self.params = {}
        for layer in range(num_layers):
            in_dim = input_dim if layer == 0 else hidden_dim
            for gate in ("z", "r", "h"):
                self.params[f"{prefix}.l{layer}.W_{gate}"] = \
                    init_matrix(rng, (hidden_dim, in_dim), dtype)
                self.params[f"{prefix}.l{layer}.U_{gate}"] = \
                    init_matrix(rng, (hidden_dim, hidden_dim), dtype)
                self.params[f"{prefix}.l{layer}.b_{gate}"] = \
                    init_zeros(hidden_dim, dtype)

    def zero_state(self):
        return [ad.const(np.zeros(self.hidden_dim, dtype=self.dtype))
                for _ in range(self.num_layers)]

    def step(self, hs, x, drop=None):
        """One step through all layers; returns (new_states, top_output).

        ``drop`` is (rate, rng) to apply inverted dropout to each
        layer's input connection.
        """
        if len(hs) != self.num_layers:
            raise ValueError(f"{self.prefix}: expected {self.num_layers} "
                             f"states, got {len(hs)}")
        p = self.params
        new_hs = []
        inp = x
        for layer in range(self.num_layers):
            if drop is not None:
                inp = dropout(inp, drop[0], drop[1])
            h = hs[layer]
            pre = f"{self.prefix}.l{layer}"
            z = sigmoid(affine2(p[f"{pre}.W_z"], inp, p[f"{pre}.U_z"], h,
                                p[f"{pre}.b_z"]))
            r = sigmoid(affine2(p[f"{pre}.W_r"], inp, p[f"{pre}.U_r"], h,
                                p[f"{pre}.b_r"]))
            hc = tanh(affine2(p[f"{pre}.W_h"], inp, p[f"{pre}.U_h"],
                              mul(r, h), p[f"{pre}.b_h"]))
            h_new = lerp(h, hc, z)
            new_hs.append(h_new)
            inp = h_new
        return new_hs, new_hs[-1]


def gru_step(gru, hs, x):
    """Spec-surface single step without dropout."""
    return gru.step(hs, x)


class ContextAttention:
    """Scores each context embedding against the decoder state.

    score_k = tanh(w1 . [query; v_k]); weights are the softmax over the
    contexts; the mixed vector is the weighted sum of the contexts.
    """

    def __init__(self, prefix, query_dim, ctx_dim, rng, dtype=np.float64):
        self.prefix = prefix
        self.params = {f"{prefix}.W_1":
                       init_matrix(rng, (1, query_dim + ctx_dim), dtype)}

    def attend(self, query, contexts):
        if not contexts:
            raise ValueError(f"{self.prefix}: empty context set")
        w1 = self.params[f"{self.prefix}.W_1"]
        scores = [tanh(affine(w1, concat([query, v]))) for v in contexts]
        weights = softmax(concat(scores))
        return weights, weighted_sum(weights, contexts)


class Mlp:
    """One tanh hidden layer, then linear."""

    def __init__(self, prefix, in_dim, hidden_dim, out_dim, rng,
                 dtype=np.float64):
        self.prefix = prefix
        self.params = {
            f"{prefix}.W_h": init_matrix(rng, (hidden_dim, in_dim), dtype),
            f"{prefix}.b_h": init_zeros(hidden_dim, dtype),
            f"{prefix}.W_o": init_matrix(rng, (out_dim, hidden_dim), dtype),
            f"{prefix}.b_o": init_zeros(out_dim, dtype),
        }

    def forward(self, x):
        p = self.params
        hidden = tanh(affine(p[f"{self.prefix}.W_h"], x,
                             p[f"{self.prefix}.b_h"]))
        return affine(p[f"{self.prefix}.W_o"], hidden,
                      p[f"{self.prefix}.b_o"])


class Adam:
    """Adam with bias correction and global-norm gradient clipping."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm=5.0):
        self.params = dict(params)
        self.names = sorted(self.params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {k: np.zeros_like(self.params[k].data) for k in self.names}
        self.v = {k: np.zeros_like(self.params[k].data) for k in self.names}

    def zero_grad(self):
        for k in self.names:
            self.params[k].zero_grad()

    def _grad(self, k):
        g = self.params[k].grad
        return g if g is not None else np.zeros_like(self.params[k].data)

    def step(self, grad_scale=1.0):
        """Apply one update from the accumulated gradients."""
        grads = {k: self._grad(k) * grad_scale for k in self.names}
        if self.clip_norm is not None:
            total = np.sqrt(sum(float((g * g).sum())
                                for g in grads.values()))
            if total > self.clip_norm:
                factor = self.clip_norm / total
                grads = {k: g * factor for k, g in grads.items()}
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k in self.names:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / b1t
            v_hat = self.v[k] / b2t
            self.params[k].data -= self.lr * m_hat / (np.sqrt(v_hat)
                                                      + self.eps)

    def state_blocks(self):
        """Moment arrays as named blocks for checkpointing."""
        blocks = {}
        for k in self.names:
            blocks[f"adam.m.{k}"] = self.m[k]
            blocks[f"adam.v.{k}"] = self.v[k]
        return blocks

    def load_state_blocks(self, blocks, t):
        for k in self.names:
            self.m[k] = blocks[f"adam.m.{k}"].copy()
            self.v[k] = blocks[f"adam.v.{k}"].copy()
        self.t = t


def adam_step(state, grads=None):
    """Spec-surface: apply one Adam update (grads already in .grad)."""
    state.step()
    return state.params
