"""Dense float64 tensors with reverse-mode automatic differentiation.

Every learned value in the package flows through :class:`Tensor`.  Forward
operations record a computation graph; :func:`backward` walks that graph in
reverse topological order and accumulates gradients additively into the
``.grad`` slot of every participating leaf until :func:`zero_grad` clears
them.  Accumulation across calls is deliberate: mini-batches over
variable-length sentences are handled by summing per-example gradients
before a single optimizer step.

All arrays are float64.  Ops validate shapes eagerly and raise
:class:`ShapeError` with both offending shapes in the message.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

from .errors import GraphError, ShapeError

__all__ = [
    "Tensor",
    "LstmWeights",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "scale",
    "tsum",
    "matmul",
    "transpose",
    "reshape",
    "concat",
    "pad_rows",
    "clip",
    "relu",
    "sigmoid",
    "tanh",
    "absolute",
    "conv1d",
    "halving_max_pool",
    "global_max_pool",
    "dense",
    "dropout",
    "bce_loss",
    "lstm_forward",
    "pairwise_dot",
    "normalize_columns",
]

BCE_CLAMP = 1e-7


def _as_f64(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


class Tensor:
    """A dense float64 array with an optional gradient slot.

    Leaf tensors are constructed directly; everything else comes out of the
    op functions below, which attach the backward closure.  ``requires_grad``
    marks trainable leaves and propagates to any value computed from one.
    """

    __slots__ = ("values", "grad", "requires_grad", "name", "_parents", "_backward", "_op")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = _as_f64(values)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._op: str | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        return float(self.values.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = self.name or self._op or "leaf"
        return f"Tensor({tag}, shape={self.shape}, requires_grad={self.requires_grad})"

    # Small conveniences; the named op functions remain the primary API.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def sum(self):
        return tsum(self)


def _node(values: np.ndarray, op: str, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(values)
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def _accumulate_leaf(t: Tensor, piece: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += piece


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every grad-requiring leaf.

    ``loss`` must be a scalar produced by a recorded computation.  Gradients
    of leaves add to whatever is already in ``.grad``; intermediate nodes use
    transient buffers and carry no state between calls.
    """
    if loss._op is None:
        raise GraphError("backward() called on a tensor that no recorded operation produced")
    if loss.values.size != 1:
        raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent._backward is not None and id(parent) not in seen:
                stack.append((parent, False))

    cotangent: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}

    def emit(parent: Tensor, piece: np.ndarray) -> None:
        if not parent.requires_grad:
            return
        if parent._backward is None:
            _accumulate_leaf(parent, piece)
            return
        key = id(parent)
        held = cotangent.get(key)
        cotangent[key] = piece if held is None else held + piece

    for node in reversed(topo):
        g = cotangent.pop(id(node), None)
        if g is None or node._backward is None:
            continue
        node._backward(g, emit)


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# elementwise and structural ops


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")

    def bwd(g, emit):
        emit(a, g)
        emit(b, g)

    return _node(a.values + b.values, "add", (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")

    def bwd(g, emit):
        emit(a, g)
        emit(b, -g)

    return _node(a.values - b.values, "sub", (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    av, bv = a.values, b.values

    def bwd(g, emit):
        emit(a, g * bv)
        emit(b, g * av)

    return _node(av * bv, "mul", (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g, emit):
        emit(a, g * c)

    return _node(a.values * c, "scale", (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""

    def bwd(g, emit):
        emit(a, np.broadcast_to(g, a.shape))

    return _node(np.asarray(a.values.sum()), "sum", (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: (m,n) @ (n,) -> (m,) or (m,n) @ (n,q) -> (m,q)."""
    av, bv = a.values, b.values
    if av.ndim != 2 or bv.ndim not in (1, 2) or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")

    if bv.ndim == 1:

        def bwd(g, emit):
            emit(a, np.outer(g, bv))
            emit(b, av.T @ g)

    else:

        def bwd(g, emit):
            emit(a, g @ bv.T)
            emit(b, av.T @ g)

    return _node(av @ bv, "matmul", (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D, got shape {a.shape}")

    def bwd(g, emit):
        emit(a, g.T)

    return _node(a.values.T.copy(), "transpose", (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    new_size = int(np.prod(shape)) if shape else 1
    if new_size != a.values.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {tuple(shape)}")

    def bwd(g, emit):
        emit(a, g.reshape(a.shape))

    return _node(a.values.reshape(shape).copy(), "reshape", (a,), bwd)


def concat(parts: list[Tensor], axis: int = 0) -> Tensor:
    if not parts:
        raise ShapeError("concat: empty part list")
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, emit):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            emit(part, g[tuple(index)])

    return _node(np.concatenate([p.values for p in parts], axis=axis), "concat", tuple(parts), bwd)


def pad_rows(a: Tensor, total_rows: int) -> Tensor:
    """Append all-zero rows to a 2-D tensor until it has ``total_rows`` rows."""
    if a.ndim != 2:
        raise ShapeError(f"pad_rows: expected 2-D, got shape {a.shape}")
    m, n = a.shape
    if total_rows < m:
        raise ShapeError(f"pad_rows: cannot shrink {m} rows to {total_rows}")
    if total_rows == m:
        return a
    out = np.zeros((total_rows, n))
    out[:m] = a.values

    def bwd(g, emit):
        emit(a, g[:m])

    return _node(out, "pad_rows", (a,), bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; gradient is identity inside, zero outside."""
    av = a.values
    inside = (av >= lo) & (av <= hi)

    def bwd(g, emit):
        emit(a, g * inside)

    return _node(np.clip(av, lo, hi), "clip", (a,), bwd)


# ---------------------------------------------------------------------------
# activations


def relu(a: Tensor) -> Tensor:
    positive = a.values > 0

    def bwd(g, emit):
        emit(a, g * positive)

    return _node(np.where(positive, a.values, 0.0), "relu", (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    s = expit(a.values)

    def bwd(g, emit):
        emit(a, g * s * (1.0 - s))

    return _node(s, "sigmoid", (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    t = np.tanh(a.values)

    def bwd(g, emit):
        emit(a, g * (1.0 - t * t))

    return _node(t, "tanh", (a,), bwd)


def absolute(a: Tensor) -> Tensor:
    av = a.values

    def bwd(g, emit):
        emit(a, g * np.sign(av))

    return _node(np.abs(av), "abs", (a,), bwd)


# ---------------------------------------------------------------------------
# text-model ops


def conv1d(x: Tensor, filters: Tensor, bias: Tensor) -> Tensor:
    """Valid 1-D convolution over a channels-by-length input.

    ``x`` is (d, m): d input channels, length m.  ``filters`` is (k, d, p):
    k output channels of width p spanning all d input channels.  Output is
    (k, m - p + 1) with
    ``out[f, j] = bias[f] + sum_{r,o} filters[f, r, o] * x[r, j + o]``.
    """
    xv, wv, bv = x.values, filters.values, bias.values
    if xv.ndim != 2:
        raise ShapeError(f"conv1d: input must be 2-D, got shape {xv.shape}")
    if wv.ndim != 3:
        raise ShapeError(f"conv1d: filters must be 3-D, got shape {wv.shape}")
    k, d, p = wv.shape
    if d != xv.shape[0]:
        raise ShapeError(f"conv1d: filter depth {d} != input channels {xv.shape[0]}")
    if bv.shape != (k,):
        raise ShapeError(f"conv1d: bias shape {bv.shape} != ({k},)")
    m = xv.shape[1]
    if p < 1 or p > m:
        raise ShapeError(f"conv1d: filter width {p} invalid for input length {m}")

    windows = np.lib.stride_tricks.sliding_window_view(xv, p, axis=1)  # (d, L, p)
    out = np.einsum("kdp,djp->kj", wv, windows) + bv[:, None]
    length = m - p + 1

    def bwd(g, emit):
        emit(filters, np.einsum("kj,djp->kdp", g, windows))
        emit(bias, g.sum(axis=1))
        if x.requires_grad:
            gx = np.zeros_like(xv)
            for o in range(p):
                gx[:, o : o + length] += wv[:, :, o].T @ g
            emit(x, gx)

    return _node(out, "conv1d", (x, filters, bias), bwd)


def halving_max_pool(x: Tensor) -> Tensor:
    """Max pool with window 2, stride 2; a trailing odd element passes through.

    Output length is ceil(L / 2).  Ties inside a window route the gradient to
    the earlier position.
    """
    xv = x.values
    if xv.ndim != 2 or xv.shape[1] < 1:
        raise ShapeError(f"halving_max_pool: need a non-empty 2-D input, got shape {xv.shape}")
    k, length = xv.shape
    pairs = length // 2
    odd = length % 2 == 1

    left = xv[:, 0 : 2 * pairs : 2]
    right = xv[:, 1 : 2 * pairs : 2]
    take_left = left >= right
    pooled = np.where(take_left, left, right)
    out = np.concatenate([pooled, xv[:, -1:]], axis=1) if odd else pooled

    even_cols = np.arange(0, 2 * pairs, 2)
    source_col = np.where(take_left, even_cols, even_cols + 1)

    def bwd(g, emit):
        gx = np.zeros_like(xv)
        if pairs:
            gx[np.arange(k)[:, None], source_col] += g[:, :pairs]
        if odd:
            gx[:, -1] += g[:, pairs]
        emit(x, gx)

    return _node(out, "halving_max_pool", (x,), bwd)


def global_max_pool(x: Tensor) -> Tensor:
    """Per-channel maximum over the length axis: (k, L) -> (k,)."""
    xv = x.values
    if xv.ndim != 2 or xv.shape[1] < 1:
        raise ShapeError(f"global_max_pool: need a non-empty 2-D input, got shape {xv.shape}")
    k = xv.shape[0]
    argmax = xv.argmax(axis=1)  # first maximum on ties

    def bwd(g, emit):
        gx = np.zeros_like(xv)
        gx[np.arange(k), argmax] += g
        emit(x, gx)

    return _node(xv[np.arange(k), argmax], "global_max_pool", (x,), bwd)


_DENSE_ACTIVATIONS = ("relu", "sigmoid", "none")


def dense(x: Tensor, weights: Tensor, bias: Tensor, activation: str = "none") -> Tensor:
    """Affine layer with optional activation: act(weights @ x + bias)."""
    if activation not in _DENSE_ACTIVATIONS:
        raise ValueError(f"dense: unknown activation {activation!r}")
    if weights.ndim != 2 or x.ndim != 1 or bias.ndim != 1:
        raise ShapeError(
            f"dense: expected weights (m,n), input (n,), bias (m,); got "
            f"{weights.shape}, {x.shape}, {bias.shape}"
        )
    if weights.shape[1] != x.shape[0] or weights.shape[0] != bias.shape[0]:
        raise ShapeError(
            f"dense: weights {weights.shape} do not match input {x.shape} and bias {bias.shape}"
        )
    pre = add(matmul(weights, x), bias)
    if activation == "relu":
        return relu(pre)
    if activation == "sigmoid":
        return sigmoid(pre)
    return pre


def dropout(x: Tensor, rate: float, mode: str, rng) -> Tensor:
    """Inverted dropout: training zeroes entries w.p. ``rate`` and rescales
    survivors by 1/(1-rate); eval mode is the identity.

    ``rng`` is an integer seed or a numpy Generator; the same seed always
    yields the same mask.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"dropout: unknown mode {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    gen = np.random.default_rng(rng)
    mask = (gen.random(x.shape) >= rate) / (1.0 - rate)

    def bwd(g, emit):
        emit(x, g * mask)

    return _node(x.values * mask, "dropout", (x,), bwd)


def bce_loss(prediction: Tensor, label: int) -> Tensor:
    """Binary cross-entropy against a hard 0/1 label.

    The prediction is clamped into [1e-7, 1 - 1e-7] before the logs so the
    loss stays finite; the clamp zeroes the gradient outside that range.
    """
    if label not in (0, 1):
        raise ValueError(f"bce_loss: label must be 0 or 1, got {label!r}")
    if prediction.values.size != 1:
        raise ShapeError(f"bce_loss: prediction must be scalar, got shape {prediction.shape}")
    raw = float(prediction.values.reshape(()))
    p = min(max(raw, BCE_CLAMP), 1.0 - BCE_CLAMP)
    loss = -np.log(p) if label == 1 else -np.log1p(-p)
    inside = BCE_CLAMP <= raw <= 1.0 - BCE_CLAMP

    def bwd(g, emit):
        if not inside:
            return
        dldp = (p - label) / (p * (1.0 - p))
        emit(prediction, (float(g) * dldp) * np.ones_like(prediction.values))

    return _node(np.asarray(loss), "bce_loss", (prediction,), bwd)


@dataclass
class LstmWeights:
    """The twelve weight arrays of a single-layer LSTM.

    ``w*`` are (hidden, input), ``u*`` are (hidden, hidden), ``b*`` are
    (hidden,).  Gate order everywhere: input, forget, output, candidate.
    """

    wi: Tensor
    ui: Tensor
    bi: Tensor
    wf: Tensor
    uf: Tensor
    bf: Tensor
    wo: Tensor
    uo: Tensor
    bo: Tensor
    wc: Tensor
    uc: Tensor
    bc: Tensor

    def tensors(self) -> tuple[Tensor, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    @property
    def hidden_size(self) -> int:
        return self.wi.shape[0]

    @property
    def input_size(self) -> int:
        return self.wi.shape[1]

    def validate(self) -> None:
        y, k = self.wi.shape
        for name in ("wi", "wf", "wo", "wc"):
            if getattr(self, name).shape != (y, k):
                raise ShapeError(f"lstm: {name} shape {getattr(self, name).shape} != ({y}, {k})")
        for name in ("ui", "uf", "uo", "uc"):
            if getattr(self, name).shape != (y, y):
                raise ShapeError(f"lstm: {name} shape {getattr(self, name).shape} != ({y}, {y})")
        for name in ("bi", "bf", "bo", "bc"):
            if getattr(self, name).shape != (y,):
                raise ShapeError(f"lstm: {name} shape {getattr(self, name).shape} != ({y},)")


def lstm_forward(xs: Tensor, weights: LstmWeights) -> Tensor:
    """Run an LSTM over the columns of ``xs`` and return the final hidden state.

    ``xs`` is (k, T): one length-k column per timestep.  Hidden and cell
    states start at zero.  Per step, with sigmoid gates i, f, o and tanh
    candidate g:

        c_t = i * g + f * c_{t-1},   h_t = o * tanh(c_t)

    The backward closure replays the recurrence in reverse (truncation-free
    BPTT) and emits gradients for the input sequence and all twelve weights.
    """
    weights.validate()
    xv = xs.values
    if xv.ndim != 2:
        raise ShapeError(f"lstm_forward: input must be 2-D, got shape {xv.shape}")
    k, steps = xv.shape
    if steps < 1:
        raise ShapeError("lstm_forward: empty input sequence")
    if k != weights.input_size:
        raise ShapeError(f"lstm_forward: input channels {k} != weight input size {weights.input_size}")

    wi, ui, bi = weights.wi.values, weights.ui.values, weights.bi.values
    wf, uf, bf = weights.wf.values, weights.uf.values, weights.bf.values
    wo, uo, bo = weights.wo.values, weights.uo.values, weights.bo.values
    wc, uc, bc = weights.wc.values, weights.uc.values, weights.bc.values
    y = weights.hidden_size

    h = np.zeros(y)
    c = np.zeros(y)
    trace = []
    for t in range(steps):
        x_t = xv[:, t]
        gate_i = expit(wi @ x_t + ui @ h + bi)
        gate_f = expit(wf @ x_t + uf @ h + bf)
        gate_o = expit(wo @ x_t + uo @ h + bo)
        cand = np.tanh(wc @ x_t + uc @ h + bc)
        c_new = gate_i * cand + gate_f * c
        tanh_c = np.tanh(c_new)
        trace.append((x_t, h, c, gate_i, gate_f, gate_o, cand, tanh_c))
        h = gate_o * tanh_c
        c = c_new

    def bwd(g, emit):
        d_h = np.asarray(g, dtype=np.float64)
        d_c = np.zeros(y)
        grads = {name: np.zeros_like(arr) for name, arr in (
            ("wi", wi), ("ui", ui), ("bi", bi),
            ("wf", wf), ("uf", uf), ("bf", bf),
            ("wo", wo), ("uo", uo), ("bo", bo),
            ("wc", wc), ("uc", uc), ("bc", bc),
        )}
        g_xs = np.zeros_like(xv) if xs.requires_grad else None
        for t in range(steps - 1, -1, -1):
            x_t, h_prev, c_prev, gate_i, gate_f, gate_o, cand, tanh_c = trace[t]
            d_o = d_h * tanh_c
            d_c = d_c + d_h * gate_o * (1.0 - tanh_c * tanh_c)
            d_i = d_c * cand
            d_f = d_c * c_prev
            d_cand = d_c * gate_i
            da_i = d_i * gate_i * (1.0 - gate_i)
            da_f = d_f * gate_f * (1.0 - gate_f)
            da_o = d_o * gate_o * (1.0 - gate_o)
            da_c = d_cand * (1.0 - cand * cand)
            grads["wi"] += np.outer(da_i, x_t)
            grads["wf"] += np.outer(da_f, x_t)
            grads["wo"] += np.outer(da_o, x_t)
            grads["wc"] += np.outer(da_c, x_t)
            grads["ui"] += np.outer(da_i, h_prev)
            grads["uf"] += np.outer(da_f, h_prev)
            grads["uo"] += np.outer(da_o, h_prev)
            grads["uc"] += np.outer(da_c, h_prev)
            grads["bi"] += da_i
            grads["bf"] += da_f
            grads["bo"] += da_o
            grads["bc"] += da_c
            if g_xs is not None:
                g_xs[:, t] = wi.T @ da_i + wf.T @ da_f + wo.T @ da_o + wc.T @ da_c
            d_h = ui.T @ da_i + uf.T @ da_f + uo.T @ da_o + uc.T @ da_c
            d_c = d_c * gate_f
        for name, tensor in zip(
            ("wi", "ui", "bi", "wf", "uf", "bf", "wo", "uo", "bo", "wc", "uc", "bc"),
            weights.tensors(),
        ):
            emit(tensor, grads[name])
        if g_xs is not None:
            emit(xs, g_xs)

    return _node(h, "lstm_forward", (xs,) + weights.tensors(), bwd)


def pairwise_dot(e1: Tensor, e2: Tensor) -> Tensor:
    """All pairwise column dot products: (d,m) x (d,n) -> (m,n).

    out[i, j] = dot(e1[:, i], e2[:, j]).  The contraction order over d is
    fixed, so transposing the arguments transposes the result bit-exactly.
    """
    av, bv = e1.values, e2.values
    if av.ndim != 2 or bv.ndim != 2 or av.shape[0] != bv.shape[0]:
        raise ShapeError(f"pairwise_dot: incompatible shapes {av.shape} and {bv.shape}")

    def bwd(g, emit):
        emit(e1, bv @ g.T)
        emit(e2, av @ g)

    return _node(np.einsum("di,dj->ij", av, bv), "pairwise_dot", (e1, e2), bwd)


def normalize_columns(e: Tensor) -> Tensor:
    """Scale each column to unit L2 norm; all-zero columns stay zero."""
    if e.ndim != 2:
        raise ShapeError(f"normalize_columns: expected 2-D, got shape {e.shape}")
    ev = e.values
    norms = np.linalg.norm(ev, axis=0)
    safe = np.where(norms == 0.0, 1.0, norms)
    out = ev / safe

    def bwd(g, emit):
        dots = (g * out).sum(axis=0)
        emit(e, (g - out * dots) / safe * (norms != 0.0))

    return _node(out, "normalize_columns", (e,), bwd)
