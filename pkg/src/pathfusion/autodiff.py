"""Reverse-mode automatic differentiation on an explicit tape.

Every tensor is a 2-D C-contiguous float64 matrix. Operations append a
node to the tape in execution order; ``Tape.backward`` walks the nodes
in reverse, so each node's local rules run exactly once. Gradients for
``Parameter`` leaves accumulate into ``param.grad`` (+=), which makes
two backward passes without an intervening ``zero_grad`` produce
doubled gradients by construction.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import ContractError, DegenerateRowError, DimensionError, NumericError

LAYER_NORM_EPS = 1e-5


def _as_matrix(data) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


class Parameter:
    """Trainable matrix with an accumulated gradient buffer."""

    def __init__(self, value, name: str):
        self.value = _as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[:] = 0.0

    @staticmethod
    def glorot(rows: int, cols: int, name: str, rng) -> "Parameter":
        # Uniform on +-sqrt(6 / (fan_in + fan_out)).
        limit = np.sqrt(6.0 / (rows + cols))
        value = rng.uniform_matrix(rows, cols, -limit, limit)
        return Parameter(value, name)

    @staticmethod
    def zeros(rows: int, cols: int, name: str) -> "Parameter":
        return Parameter(np.zeros((rows, cols)), name)

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.value.shape})"


class Tensor:
    """Handle to one tape node plus its forward value."""

    __slots__ = ("tape", "node_id", "data")

    def __init__(self, tape: "Tape", node_id: int, data: np.ndarray):
        self.tape = tape
        self.node_id = node_id
        self.data = data

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def grad(self) -> np.ndarray:
        return self.tape.grad(self)

    def __repr__(self) -> str:
        return f"Tensor(node={self.node_id}, shape={self.data.shape})"


class _Node:
    __slots__ = ("rules",)

    def __init__(self, rules):
        # rules: list of (target, fn) where target is an upstream node id
        # or a Parameter, and fn maps the output gradient to the target's
        # gradient contribution.
        self.rules = rules


class Tape:
    """Records the forward pass and replays it backward for gradients."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._grads: dict[int, np.ndarray] = {}
        self._param_nodes: dict[int, Tensor] = {}

    def _record(self, data: np.ndarray, rules) -> Tensor:
        node_id = len(self._nodes)
        self._nodes.append(_Node(rules))
        return Tensor(self, node_id, data)

    def constant(self, data) -> Tensor:
        """Leaf that never receives a gradient."""
        return self._record(_as_matrix(data), [])

    def input(self, data) -> Tensor:
        """Leaf whose gradient is retrievable via ``Tape.grad``."""
        return self._record(_as_matrix(data), [])

    def read(self, param: Parameter) -> Tensor:
        """Leaf hooked up to ``param.grad``. One node per tape per parameter."""
        key = id(param)
        cached = self._param_nodes.get(key)
        if cached is not None:
            return cached
        tensor = self._record(param.value.copy(), [(param, lambda g: g)])
        self._param_nodes[key] = tensor
        return tensor

    def backward(self, loss: Tensor) -> None:
        if loss.tape is not self:
            raise ContractError("loss tensor belongs to a different tape")
        if loss.data.shape != (1, 1):
            raise ContractError(
                f"backward needs a 1x1 loss, got shape {loss.data.shape}"
            )
        if not np.isfinite(loss.data[0, 0]):
            raise NumericError(f"loss is not finite: {loss.data[0, 0]!r}")
        grads: dict[int, np.ndarray] = {loss.node_id: np.ones((1, 1))}
        for node_id in range(loss.node_id, -1, -1):
            gout = grads.get(node_id)
            if gout is None:
                continue
            for target, fn in self._nodes[node_id].rules:
                contrib = fn(gout)
                if isinstance(target, Parameter):
                    target.grad += contrib
                else:
                    seen = grads.get(target)
                    if seen is None:
                        grads[target] = contrib.copy()
                    else:
                        seen += contrib
        self._grads = grads

    def grad(self, tensor: Tensor) -> np.ndarray:
        """Gradient of the last backward's loss w.r.t. this tensor."""
        g = self._grads.get(tensor.node_id)
        if g is None:
            return np.zeros_like(tensor.data)
        return g


def _coerce(tape: Tape | None, x):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, Parameter):
        if tape is None:
            raise ContractError("a bare Parameter operand needs an explicit tape")
        return tape.read(x)
    if tape is None:
        raise ContractError("a raw array operand needs an explicit tape")
    return tape.constant(x)


def _pair(a, b):
    """Coerce two operands onto one shared tape."""
    tape = None
    for x in (a, b):
        if isinstance(x, Tensor):
            if tape is not None and x.tape is not tape:
                raise ContractError("operands live on different tapes")
            tape = x.tape
    if tape is None:
        raise ContractError("at least one operand must be a Tensor")
    return tape, _coerce(tape, a), _coerce(tape, b)


def matmul(a, b) -> Tensor:
    tape, a, b = _pair(a, b)
    if a.cols != b.rows:
        raise DimensionError(
            f"matmul shapes do not chain: {a.data.shape} @ {b.data.shape}"
        )
    out = a.data @ b.data
    a_data, b_data = a.data, b.data
    rules = [
        (a.node_id, lambda g: g @ b_data.T),
        (b.node_id, lambda g: a_data.T @ g),
    ]
    return tape._record(out, rules)


def transpose(x: Tensor) -> Tensor:
    out = np.ascontiguousarray(x.data.T)
    return x.tape._record(out, [(x.node_id, lambda g: np.ascontiguousarray(g.T))])


def add(a, b) -> Tensor:
    """Elementwise sum; a 1-row operand broadcasts across the other's rows."""
    tape, a, b = _pair(a, b)
    if a.data.shape == b.data.shape:
        out = a.data + b.data
        rules = [(a.node_id, lambda g: g), (b.node_id, lambda g: g)]
    elif a.rows == 1 and a.cols == b.cols:
        out = b.data + a.data
        rules = [
            (a.node_id, lambda g: g.sum(axis=0, keepdims=True)),
            (b.node_id, lambda g: g),
        ]
    elif b.rows == 1 and b.cols == a.cols:
        out = a.data + b.data
        rules = [
            (a.node_id, lambda g: g),
            (b.node_id, lambda g: g.sum(axis=0, keepdims=True)),
        ]
    else:
        raise DimensionError(
            f"add shapes incompatible: {a.data.shape} vs {b.data.shape}"
        )
    return tape._record(out, rules)


def scale(x: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    out = x.data * factor
    return x.tape._record(out, [(x.node_id, lambda g: g * factor)])


def affine(x: Tensor, mul: float, shift: float) -> Tensor:
    """Elementwise mul * x + shift."""
    mul = float(mul)
    out = mul * x.data + float(shift)
    return x.tape._record(out, [(x.node_id, lambda g: g * mul)])


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = _stable_sigmoid(x.data)
    return x.tape._record(out, [(x.node_id, lambda g: g * out * (1.0 - out))])


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0.0)
    x_data = x.data
    return x.tape._record(out, [(x.node_id, lambda g: g * (x_data > 0.0))])


def silu(x: Tensor) -> Tensor:
    """x * sigmoid(x)."""
    s = _stable_sigmoid(x.data)
    out = x.data * s
    x_data = x.data
    return x.tape._record(
        out, [(x.node_id, lambda g: g * (s * (1.0 + x_data * (1.0 - s))))]
    )


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    if not np.all(np.isfinite(out)):
        raise NumericError("exp overflowed to a non-finite value")
    return x.tape._record(out, [(x.node_id, lambda g: g * out)])


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0.0):
        raise NumericError("log needs strictly positive inputs; clamp first")
    out = np.log(x.data)
    x_data = x.data
    return x.tape._record(out, [(x.node_id, lambda g: g / x_data)])


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip into [lo, hi]; gradient is zero where the clip is active."""
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ContractError(f"clamp needs lo < hi, got [{lo}, {hi}]")
    out = np.clip(x.data, lo, hi)
    inside = (x.data > lo) & (x.data < hi)
    return x.tape._record(out, [(x.node_id, lambda g: g * inside)])


def dropout(x: Tensor, rate: float, rng, training: bool) -> Tensor:
    """Inverted dropout: survivors scaled by 1/(1-rate) so E[out] = x."""
    rate = float(rate)
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x.tape._record(x.data.copy(), [(x.node_id, lambda g: g)])
    keep = rng.uniform(x.data.size).reshape(x.data.shape) >= rate
    scale_up = 1.0 / (1.0 - rate)
    mask = keep * scale_up
    out = x.data * mask
    return x.tape._record(out, [(x.node_id, lambda g: g * mask)])


def row_softmax(x: Tensor, keep_mask: np.ndarray | None = None) -> Tensor:
    """Softmax over each row; masked-out entries get exactly zero weight.

    ``keep_mask`` is a same-shape 0/1 array; a row with no kept entry is
    an error rather than a silent NaN.
    """
    if keep_mask is None:
        keep = np.ones(x.data.shape, dtype=np.uint8)
    else:
        keep = np.ascontiguousarray(keep_mask).astype(np.uint8)
        if keep.shape != x.data.shape:
            raise DimensionError(
                f"mask shape {keep.shape} does not match scores {x.data.shape}"
            )
    dead = np.where(keep.sum(axis=1) == 0)[0]
    if dead.size:
        raise DegenerateRowError(
            f"softmax row(s) {dead.tolist()} have every entry masked"
        )
    out = _kernels.softmax_rows_fwd(x.data, keep)
    return x.tape._record(
        out, [(x.node_id, lambda g: _kernels.softmax_rows_bwd(out, g))]
    )


def layer_norm(x, gain, bias) -> Tensor:
    """Row-wise standardization followed by elementwise gain and bias."""
    tape, x, gain = _pair(x, gain)
    bias = _coerce(tape, bias)
    d = x.cols
    if gain.data.shape != (1, d) or bias.data.shape != (1, d):
        raise DimensionError(
            f"layer_norm gain/bias must be 1x{d}, got "
            f"{gain.data.shape} and {bias.data.shape}"
        )
    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    xhat = (x.data - mu) * inv_std
    out = xhat * gain.data + bias.data
    gain_data = gain.data

    def grad_x(g):
        dxhat = g * gain_data
        m1 = dxhat.mean(axis=1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=1, keepdims=True)
        return inv_std * (dxhat - m1 - xhat * m2)

    rules = [
        (x.node_id, grad_x),
        (gain.node_id, lambda g: (g * xhat).sum(axis=0, keepdims=True)),
        (bias.node_id, lambda g: g.sum(axis=0, keepdims=True)),
    ]
    return tape._record(out, rules)


def mean_rows(x: Tensor) -> Tensor:
    """Column means as a single row."""
    n = x.rows
    out = x.data.mean(axis=0, keepdims=True)
    return x.tape._record(
        out, [(x.node_id, lambda g: np.repeat(g, n, axis=0) / n)]
    )


def concat_rows(a, b) -> Tensor:
    tape, a, b = _pair(a, b)
    if a.cols != b.cols:
        raise DimensionError(
            f"concat_rows needs equal widths: {a.data.shape} vs {b.data.shape}"
        )
    out = np.vstack([a.data, b.data])
    split = a.rows
    rules = [
        (a.node_id, lambda g: g[:split]),
        (b.node_id, lambda g: g[split:]),
    ]
    return tape._record(out, rules)


def concat_cols(a, b) -> Tensor:
    tape, a, b = _pair(a, b)
    if a.rows != b.rows:
        raise DimensionError(
            f"concat_cols needs equal heights: {a.data.shape} vs {b.data.shape}"
        )
    out = np.hstack([a.data, b.data])
    split = a.cols
    rules = [
        (a.node_id, lambda g: np.ascontiguousarray(g[:, :split])),
        (b.node_id, lambda g: np.ascontiguousarray(g[:, split:])),
    ]
    return tape._record(out, rules)


def gather_cols(x: Tensor, indices) -> Tensor:
    """Select columns by index; gradients scatter-add back."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ContractError("gather_cols needs a non-empty 1-D index list")
    if idx.min() < 0 or idx.max() >= x.cols:
        raise DimensionError(
            f"gather index out of range for width {x.cols}: "
            f"[{idx.min()}, {idx.max()}]"
        )
    out = np.ascontiguousarray(x.data[:, idx])
    rows, cols = x.data.shape

    def grad_x(g):
        dx = np.zeros((rows, cols))
        np.add.at(dx, (slice(None), idx), g)
        return dx

    return x.tape._record(out, [(x.node_id, grad_x)])


def stack_rows(tensors) -> Tensor:
    """Vertically stack a list of tensors sharing one tape and width."""
    tensors = list(tensors)
    if not tensors:
        raise ContractError("stack_rows needs at least one tensor")
    tape = tensors[0].tape
    width = tensors[0].cols
    for t in tensors[1:]:
        if t.tape is not tape:
            raise ContractError("operands live on different tapes")
        if t.cols != width:
            raise DimensionError(
                f"stack_rows widths differ: {width} vs {t.cols}"
            )
    out = np.vstack([t.data for t in tensors])
    rules = []
    start = 0
    for t in tensors:
        stop = start + t.rows
        rules.append((t.node_id, lambda g, a=start, b=stop: g[a:b].copy()))
        start = stop
    return tape._record(out, rules)


def weighted_sum(x: Tensor, weights) -> Tensor:
    """Scalar sum(x * weights) for a constant weight matrix."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.shape != x.data.shape:
        raise DimensionError(
            f"weights shape {w.shape} does not match operand {x.data.shape}"
        )
    out = np.array([[float((x.data * w).sum())]])
    return x.tape._record(out, [(x.node_id, lambda g: g[0, 0] * w)])


def sum_all(x: Tensor) -> Tensor:
    """Scalar sum of all entries."""
    out = np.array([[float(x.data.sum())]])
    shape = x.data.shape
    return x.tape._record(
        out, [(x.node_id, lambda g: np.full(shape, g[0, 0]))]
    )
