"""Minimal reverse-mode automatic differentiation over numpy arrays.

Node granularity is chosen for the recurrent decoders in this package:
fused affine ops keep the tape short inside GRU steps, and the softmax
cross-entropy op exposes its probability vector so decoding code can
read distributions without extra nodes.  Backward runs over an
iterative topological sort (sequence graphs are deep).

Inference code wraps itself in ``no_grad()`` so beam search does not
pay for tape construction.
"""

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "parents", "bw", "requires_grad")

    def __init__(self, data, parents=(), bw=None, requires_grad=False):
        self.data = data
        self.grad = None
        self.parents = parents
        self.bw = bw
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None


def param(data):
    """Trainable leaf."""
    return Tensor(np.asarray(data), requires_grad=True)


def const(data):
    return Tensor(np.asarray(data))


def _track(*tensors):
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data, parents, bw):
    if _track(*parents):
        return Tensor(data, parents=parents, bw=bw, requires_grad=True)
    return Tensor(data)


def affine(W, x, b=None):
    """W @ x (+ b)."""
    out = W.data @ x.data
    if b is not None:
        out = out + b.data
    parents = (W, x) if b is None else (W, x, b)

    def bw(g):
        _accum(W, np.outer(g, x.data))
        _accum(x, W.data.T @ g)
        if b is not None:
            _accum(b, g)
    return _node(out, parents, bw)


def affine2(W1, x1, W2, x2, b=None):
    """W1 @ x1 + W2 @ x2 (+ b), the GRU gate shape."""
    out = W1.data @ x1.data + W2.data @ x2.data
    if b is not None:
        out = out + b.data
    parents = (W1, x1, W2, x2) if b is None else (W1, x1, W2, x2, b)

    def bw(g):
        _accum(W1, np.outer(g, x1.data))
        _accum(x1, W1.data.T @ g)
        _accum(W2, np.outer(g, x2.data))
        _accum(x2, W2.data.T @ g)
        if b is not None:
            _accum(b, g)
    return _node(out, parents, bw)


def add(a, b):
    def bw(g):
        _accum(a, g)
        _accum(b, g)
    return _node(a.data + b.data, (a, b), bw)


def add_const(a, c):
    """Add a constant numpy array (no gradient through c)."""
    def bw(g):
        _accum(a, g)
    return _node(a.data + c, (a,), bw)


def mul(a, b):
    def bw(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)
    return _node(a.data * b.data, (a, b), bw)


def scale(a, s):
    def bw(g):
        _accum(a, g * s)
    return _node(a.data * s, (a,), bw)


def lerp(h, h_new, z):
    """(1 - z) * h + z * h_new, the GRU state blend."""
    out = h.data + z.data * (h_new.data - h.data)

    def bw(g):
        _accum(h, g * (1.0 - z.data))
        _accum(h_new, g * z.data)
        _accum(z, g * (h_new.data - h.data))
    return _node(out, (h, h_new, z), bw)


def tanh(a):
    out = np.tanh(a.data)

    def bw(g):
        _accum(a, g * (1.0 - out * out))
    return _node(out, (a,), bw)


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        _accum(a, g * out * (1.0 - out))
    return _node(out, (a,), bw)


def concat(tensors):
    sizes = [t.data.shape[0] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            _accum(t, g[lo:hi])
    return _node(np.concatenate([t.data for t in tensors]),
                 tuple(tensors), bw)


def softmax(a):
    z = a.data - a.data.max()
    e = np.exp(z)
    out = e / e.sum()

    def bw(g):
        _accum(a, out * (g - float(g @ out)))
    return _node(out, (a,), bw)


def weighted_sum(weights, vectors):
    """sum_k weights[k] * vectors[k] for a list of equal-size vectors."""
    out = np.zeros_like(vectors[0].data)
    for k, v in enumerate(vectors):
        out = out + weights.data[k] * v.data

    def bw(g):
        wg = np.array([float(g @ v.data) for v in vectors],
                      dtype=weights.data.dtype)
        _accum(weights, wg)
        for k, v in enumerate(vectors):
            _accum(v, g * weights.data[k])
    return _node(out, (weights, *vectors), bw)


def lookup_row(table, idx):
    out = table.data[idx]

    def bw(g):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            table.grad[idx] += g
    return _node(out, (table,), bw)


def dropout(x, rate, rng):
    """Inverted dropout; call only in training mode."""
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * mask

    def bw(g):
        _accum(x, g * mask)
    return _node(out, (x,), bw)


def xent_logits(logits, target):
    """Numerically stable softmax cross-entropy.

    Returns (scalar loss tensor, probability vector as numpy).
    """
    if not 0 <= target < logits.data.shape[0]:
        raise IndexError(f"target {target} out of range "
                         f"for {logits.data.shape[0]} classes")
    z = logits.data - logits.data.max()
    logz = np.log(np.exp(z).sum())
    probs = np.exp(z - logz)
    loss = logz - z[target]

    def bw(g):
        grad = probs.copy()
        grad[target] -= 1.0
        _accum(logits, g * grad)
    return _node(np.asarray(loss), (logits,), bw), probs


def sum_tensors(tensors):
    out = np.asarray(sum(float(t.data) for t in tensors))

    def bw(g):
        for t in tensors:
            _accum(t, g)
    return _node(out, tuple(tensors), bw)


def backward(loss):
    """Reverse-accumulate gradients from a scalar loss."""
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node.bw is not None and node.grad is not None:
            node.bw(node.grad)


def grad_check(fn, params, eps=1e-5):
    """Max relative error between analytic and central-difference grads.

    ``fn`` rebuilds and returns the scalar loss from the current values
    of ``params`` (a name -> Tensor dict); it must be deterministic and
    dropout-free, and the parameters should be float64.
    """
    for p in params.values():
        p.zero_grad()
    loss = fn()
    backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None
                       else np.zeros_like(p.data))
                for name, p in params.items()}
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(fn().data)
            flat[i] = orig - eps
            dn = float(fn().data)
            flat[i] = orig
            numeric = (up - dn) / (2.0 * eps)
            a = float(analytic[name].reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if err > worst:
                worst = err
    return worst
