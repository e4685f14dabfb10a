"""Reverse-mode automatic differentiation over float64 numpy arrays.

The op set is deliberately small: exactly the primitives the model needs,
each with a hand-written vector-Jacobian product. Graphs are built per
forward pass and freed afterwards; parameter gradients accumulate across
backward calls until zeroed.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, expit

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def backward(self):
        """Accumulate d(sum of self)/d(leaf) into every reachable leaf's grad."""
        if not self.requires_grad:
            raise ValueError("backward on a node that tracks no gradients")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            # a node may be queued twice through different consumers; only
            # the first pop expands it, so every parent lands in topo first
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in topo:
            if node._parents:
                node.grad = np.zeros_like(node.data)
            elif node.grad is None:
                node.grad = np.zeros_like(node.data)
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


class Parameter(Tensor):
    """A named leaf tensor with a persistent gradient buffer.

    Non-trainable parameters still receive gradients (useful for probing)
    but optimizers leave them untouched.
    """

    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str = "", trainable: bool = True):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.trainable = trainable
        self.grad = np.zeros_like(self.data)


class ParamStore:
    """Ordered, name-addressed collection of Parameters."""

    def __init__(self):
        self._params: dict = {}

    def add(self, name: str, data, trainable: bool = True) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        p = Parameter(data, name=name, trainable=trainable)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def zero_grads(self):
        for p in self._params.values():
            p.grad[...] = 0.0

    def count(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def state_dict(self) -> dict:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state: dict):
        if set(state.keys()) != set(self._params.keys()):
            raise ValueError("parameter names do not match the stored state")
        for name, p in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {name}")
            p.data[...] = arr


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents) -> Tensor:
    kept = tuple(p for p in parents if p.requires_grad)
    if not kept:
        return Tensor(data)
    out = Tensor(data, requires_grad=True)
    out._parents = kept
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce g back to `shape` by summing broadcast axes."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _node(a.data + b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad, a.data.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad, b.data.shape)

        out._backward = _backward
    return out


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _node(a.data - b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad, a.data.shape)
            if b.requires_grad:
                b.grad -= _unbroadcast(out.grad, b.data.shape)

        out._backward = _backward
    return out


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _node(a.data * b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad * b.data, a.data.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad * a.data, b.data.shape)

        out._backward = _backward
    return out


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = _node(a.data / b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad / b.data, a.data.shape)
            if b.requires_grad:
                b.grad -= _unbroadcast(out.grad * a.data / (b.data * b.data), b.data.shape)

        out._backward = _backward
    return out


def minimum(a, b) -> Tensor:
    """Elementwise min; ties send the gradient to the first argument."""
    a, b = _wrap(a), _wrap(b)
    out = _node(np.minimum(a.data, b.data), (a, b))
    if out.requires_grad:
        take_a = a.data <= b.data

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad * take_a, a.data.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad * ~take_a, b.data.shape)

        out._backward = _backward
    return out


def maximum(a, b) -> Tensor:
    """Elementwise max; ties send the gradient to the first argument."""
    a, b = _wrap(a), _wrap(b)
    out = _node(np.maximum(a.data, b.data), (a, b))
    if out.requires_grad:
        take_a = a.data >= b.data

        def _backward():
            if a.requires_grad:
                a.grad += _unbroadcast(out.grad * take_a, a.data.shape)
            if b.requires_grad:
                b.grad += _unbroadcast(out.grad * ~take_a, b.data.shape)

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def square(a) -> Tensor:
    a = _wrap(a)
    out = _node(a.data * a.data, (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * 2.0 * a.data

        out._backward = _backward
    return out


def power(a, exponent: float) -> Tensor:
    """a ** exponent for strictly positive a."""
    a = _wrap(a)
    out = _node(np.power(a.data, exponent), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * exponent * np.power(a.data, exponent - 1.0)

        out._backward = _backward
    return out


def log(a) -> Tensor:
    a = _wrap(a)
    out = _node(np.log(a.data), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad / a.data

        out._backward = _backward
    return out


def exp(a) -> Tensor:
    a = _wrap(a)
    out = _node(np.exp(a.data), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * out.data

        out._backward = _backward
    return out


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    s = expit(a.data)
    out = _node(s, (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * s * (1.0 - s)

        out._backward = _backward
    return out


def silu(a) -> Tensor:
    a = _wrap(a)
    s = expit(a.data)
    out = _node(a.data * s, (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * s * (1.0 + a.data * (1.0 - s))

        out._backward = _backward
    return out


def gelu(a) -> Tensor:
    """Exact-erf GeLU: x * Phi(x)."""
    a = _wrap(a)
    phi_cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = _node(a.data * phi_cdf, (a,))
    if out.requires_grad:

        def _backward():
            pdf = _INV_SQRT2PI * np.exp(-0.5 * a.data * a.data)
            a.grad += out.grad * (phi_cdf + a.data * pdf)

        out._backward = _backward
    return out


def softplus(a) -> Tensor:
    a = _wrap(a)
    out = _node(np.logaddexp(0.0, a.data), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad * expit(a.data)

        out._backward = _backward
    return out


def relu(a) -> Tensor:
    a = _wrap(a)
    out = _node(np.maximum(a.data, 0.0), (a,))
    if out.requires_grad:
        active = a.data > 0.0

        def _backward():
            a.grad += out.grad * active

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# reductions, reshapes, gathers


def sum_all(a) -> Tensor:
    a = _wrap(a)
    out = _node(a.data.sum(), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad

        out._backward = _backward
    return out


def mean_time(a) -> Tensor:
    """(L, D) -> (D,) mean over the time axis."""
    a = _wrap(a)
    length = a.data.shape[0]
    out = _node(a.data.mean(axis=0), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad[None, :] / length

        out._backward = _backward
    return out


def broadcast_time(v, length: int) -> Tensor:
    """(D,) -> (L, D) by repetition along a new time axis."""
    v = _wrap(v)
    out = _node(np.broadcast_to(v.data, (length,) + v.data.shape).copy(), (v,))
    if out.requires_grad:

        def _backward():
            v.grad += out.grad.sum(axis=0)

        out._backward = _backward
    return out


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = _node(a.data.reshape(shape), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad.reshape(a.data.shape)

        out._backward = _backward
    return out


def reverse_time(a) -> Tensor:
    a = _wrap(a)
    out = _node(a.data[::-1].copy(), (a,))
    if out.requires_grad:

        def _backward():
            a.grad += out.grad[::-1]

        out._backward = _backward
    return out


def concat_channels(tensors) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = _node(np.concatenate([t.data for t in tensors], axis=-1), tuple(tensors))
    if out.requires_grad:
        widths = [t.data.shape[-1] for t in tensors]
        edges = np.cumsum([0] + widths)

        def _backward():
            for t, lo, hi in zip(tensors, edges[:-1], edges[1:]):
                if t.requires_grad:
                    t.grad += out.grad[..., lo:hi]

        out._backward = _backward
    return out


def concat_time(tensors) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = _node(np.concatenate([t.data for t in tensors], axis=0), tuple(tensors))
    if out.requires_grad:
        lengths = [t.data.shape[0] for t in tensors]
        edges = np.cumsum([0] + lengths)

        def _backward():
            for t, lo, hi in zip(tensors, edges[:-1], edges[1:]):
                if t.requires_grad:
                    t.grad += out.grad[lo:hi]

        out._backward = _backward
    return out


def take_time(a, idx) -> Tensor:
    """Gather rows along the time axis; duplicate indices are allowed."""
    a = _wrap(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = _node(a.data[idx], (a,))
    if out.requires_grad:

        def _backward():
            np.add.at(a.grad, idx, out.grad)

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# normalization


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean, unit variance. No affine part."""
    a = _wrap(a)
    mean = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    normed = (a.data - mean) * inv_std
    out = _node(normed, (a,))
    if out.requires_grad:

        def _backward():
            g = out.grad
            g_mean = g.mean(axis=-1, keepdims=True)
            gy_mean = (g * normed).mean(axis=-1, keepdims=True)
            a.grad += inv_std * (g - g_mean - normed * gy_mean)

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# frequency-domain projection


def low_pass_rows(x: np.ndarray, cutoff: int) -> np.ndarray:
    """Keep the `cutoff` lowest frequency bins (plus mirrors) of the columns
    of x along axis 0 and transform back. Pure numpy, shared with the
    forward pass and the (self-adjoint) backward pass."""
    length = x.shape[0]
    c_eff = min(int(cutoff), length // 2 + 1)
    spec = np.fft.fft(x, axis=0)
    k = np.arange(length)
    keep = (k < c_eff) | (k > length - c_eff)
    spec[~keep] = 0.0
    return np.fft.ifft(spec, axis=0).real


def low_pass_time(a, cutoff: int) -> Tensor:
    """Orthogonal projection onto the low-frequency subspace along time."""
    a = _wrap(a)
    out = _node(low_pass_rows(a.data, cutoff), (a,))
    if out.requires_grad:

        def _backward():
            # projection is self-adjoint
            a.grad += low_pass_rows(out.grad, cutoff)

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# local temporal mixing


def window_mean(a, window: int) -> Tensor:
    """Mean over a forward-looking window [t, t+window) with replicate
    padding past the right edge."""
    a = _wrap(a)
    x = a.data
    length = x.shape[0]
    padded = np.concatenate([x, np.repeat(x[-1:], window - 1, axis=0)], axis=0)
    avg = np.zeros_like(x)
    for j in range(window):
        avg += padded[j : j + length]
    avg /= window
    out = _node(avg, (a,))
    if out.requires_grad:

        def _backward():
            gpad = np.zeros_like(padded)
            for j in range(window):
                gpad[j : j + length] += out.grad
            ga = gpad[:length].copy()
            ga[-1] += gpad[length:].sum(axis=0)
            a.grad += ga / window

        out._backward = _backward
    return out


def _shift_rows(x: np.ndarray, s: int, mode: str) -> np.ndarray:
    """out[t] = x[t + s], out-of-range rows zero-filled or edge-replicated."""
    length = x.shape[0]
    out = np.zeros_like(x)
    if s >= 0:
        n = max(length - s, 0)
        if n:
            out[:n] = x[s:]
        if mode == "replicate":
            out[n:] = x[-1]
    else:
        n = max(length + s, 0)
        if n:
            out[-s:] = x[:n]
        if mode == "replicate":
            out[: length - n] = x[0]
    return out


def _shift_rows_adjoint(g: np.ndarray, s: int, mode: str) -> np.ndarray:
    length = g.shape[0]
    out = _shift_rows(g, -s, "zero")
    if mode == "replicate":
        if s > 0:
            tail = g[max(length - s, 0) :]
            if tail.size:
                out[-1] += tail.sum(axis=0)
        elif s < 0:
            head = g[: min(-s, length)]
            if head.size:
                out[0] += head.sum(axis=0)
    return out


def depthwise_conv_time(a, weight, dilation: int = 1, pad_mode: str = "zero") -> Tensor:
    """Per-channel temporal convolution. weight (k, D), k odd, centered taps,
    stride 1, output length preserved."""
    a, weight = _wrap(a), _wrap(weight)
    k = weight.data.shape[0]
    if k % 2 != 1:
        raise ValueError("kernel size must be odd")
    offsets = [(j - (k - 1) // 2) * dilation for j in range(k)]
    shifted = [_shift_rows(a.data, s, pad_mode) for s in offsets]
    y = np.zeros_like(a.data)
    for xs, wj in zip(shifted, weight.data):
        y += xs * wj
    out = _node(y, (a, weight))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                for s, wj in zip(offsets, weight.data):
                    a.grad += _shift_rows_adjoint(out.grad * wj, s, pad_mode)
            if weight.requires_grad:
                for j, xs in enumerate(shifted):
                    weight.grad[j] += (out.grad * xs).sum(axis=0)

        out._backward = _backward
    return out


def conv1d(a, weight, bias=None) -> Tensor:
    """Full temporal convolution: (L, Din) x (k, Din, Dout) -> (L, Dout).
    k odd, centered, zero padding, stride 1."""
    a, weight = _wrap(a), _wrap(weight)
    k = weight.data.shape[0]
    if k % 2 != 1:
        raise ValueError("kernel size must be odd")
    offsets = [j - (k - 1) // 2 for j in range(k)]
    shifted = np.stack([_shift_rows(a.data, s, "zero") for s in offsets])
    y = np.einsum("kli,kio->lo", shifted, weight.data, optimize=True)
    parents = [a, weight]
    if bias is not None:
        bias = _wrap(bias)
        y = y + bias.data
        parents.append(bias)
    out = _node(y, tuple(parents))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                for s, wj in zip(offsets, weight.data):
                    a.grad += _shift_rows(out.grad @ wj.T, -s, "zero")
            if weight.requires_grad:
                weight.grad += np.einsum("kli,lo->kio", shifted, out.grad, optimize=True)
            if bias is not None and bias.requires_grad:
                bias.grad += out.grad.sum(axis=0)

        out._backward = _backward
    return out


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    out = _node(a.data @ b.data, (a, b))
    if out.requires_grad:

        def _backward():
            if a.requires_grad:
                a.grad += out.grad @ b.data.T
            if b.requires_grad:
                b.grad += a.data.T @ out.grad

        out._backward = _backward
    return out


# ---------------------------------------------------------------------------
# recurrence and pooling


def _affine_scan(v: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """h[t] = lam * h[t-1] + v[t] with h[-1] = 0, computed with a
    log-depth composition of affine maps."""
    length = v.shape[0]
    coef = np.broadcast_to(lam, v.shape).astype(np.float64).copy()
    acc = v.copy()
    d = 1
    while d < length:
        # numpy evaluates each right-hand side fully before assignment
        acc[d:] = acc[d:] + coef[d:] * acc[:-d]
        coef[d:] = coef[d:] * coef[:-d]
        d *= 2
    return acc


def linear_scan(v, lam) -> Tensor:
    """First-order linear recurrence along time: h[t] = lam * h[t-1] + v[t].

    v is (L, D), lam is (D,) per-channel decay. The backward pass runs the
    same recurrence on the reversed gradient stream.
    """
    v, lam = _wrap(v), _wrap(lam)
    h = _affine_scan(v.data, lam.data)
    out = _node(h, (v, lam))
    if out.requires_grad:

        def _backward():
            q = _affine_scan(out.grad[::-1], lam.data)[::-1]
            if v.requires_grad:
                v.grad += q
            if lam.requires_grad and h.shape[0] > 1:
                lam.grad += (q[1:] * h[:-1]).sum(axis=0)

        out._backward = _backward
    return out


def maxpool2_time(a) -> Tensor:
    """Max over non-overlapping time pairs; an odd final step passes through.
    Output length is ceil(L / 2)."""
    a = _wrap(a)
    length, dim = a.data.shape
    half = length // 2
    pairs = a.data[: 2 * half].reshape(half, 2, dim)
    pooled = pairs.max(axis=1)
    argmax = pairs.argmax(axis=1)  # ties resolve to the earlier step
    if length % 2:
        pooled = np.concatenate([pooled, a.data[-1:]], axis=0)
    out = _node(pooled, (a,))
    if out.requires_grad:

        def _backward():
            gp = np.zeros((half, 2, dim))
            np.put_along_axis(gp, argmax[:, None, :], out.grad[:half, None, :], axis=1)
            a.grad[: 2 * half] += gp.reshape(2 * half, dim)
            if length % 2:
                a.grad[-1] += out.grad[-1]

        out._backward = _backward
    return out
