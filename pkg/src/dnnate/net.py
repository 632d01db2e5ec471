"""From-scratch feedforward networks used by every estimator.

Two architecture families share one representation: a stack of layers,
each holding a dense (n_in, n_out) weight matrix, a bias vector, an
activation tag, and an optional boolean connectivity mask.  Dense
experiment networks have no masks; the sparse hierarchical family is
compiled into block-diagonal masks plus a frozen unit-weight summation
layer.  Masked-off weights are exactly zero and are excluded from the
flat coefficient vector, so they never move during training.

Flat coefficient ordering: for each trainable layer in forward order,
the active weight entries in row-major (input-index-major) order,
followed by that layer's biases.  Frozen layers contribute nothing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, TrainingDivergedError
from .rng import make_generator

NET_FORMAT = "dnnate-net-1"

_ACTIVATIONS = ("sigmoid", "relu", "linear")
# exp saturates sigmoid to 0/1 beyond this without overflowing float64
_SIG_CLIP = 709.0


def trunc(value, bound):
    """Clamp value to [-bound, bound]; bound must be positive.

    Elementwise over arrays; equals value when |value| <= bound and
    bound * sign(value) otherwise.
    """
    if not bound > 0:
        raise InvalidInputError(f"truncation bound must be positive, got {bound}")
    arr = np.asarray(value, dtype=np.float64)
    clipped = np.clip(arr, -bound, bound)
    return float(clipped) if arr.ndim == 0 else clipped


def _sigmoid_inplace(z):
    np.clip(z, -_SIG_CLIP, _SIG_CLIP, out=z)
    np.negative(z, out=z)
    np.exp(z, out=z)
    z += 1.0
    np.reciprocal(z, out=z)


def _activate_inplace(z, kind):
    if kind == "sigmoid":
        _sigmoid_inplace(z)
    elif kind == "relu":
        np.maximum(z, 0.0, out=z)
    # linear: identity


@dataclass(eq=False)
class Layer:
    """One affine layer; weights (n_in, n_out), mask None means dense."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str
    mask: np.ndarray | None = None
    trainable: bool = True

    def copy(self) -> "Layer":
        return Layer(
            self.weights.copy(),
            self.biases.copy(),
            self.activation,
            None if self.mask is None else self.mask.copy(),
            self.trainable,
        )


class NeuralNet:
    """Feedforward network with a scalar linear output."""

    def __init__(self, layers, activation_kind, clip_alpha=None, topology=None, meta=None):
        layers = list(layers)
        if not layers:
            raise InvalidInputError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weights.shape[1] != nxt.weights.shape[0]:
                raise InvalidInputError("adjacent layer shapes are inconsistent")
        if layers[-1].weights.shape[1] != 1:
            raise InvalidInputError("output layer must have width 1")
        if activation_kind not in ("sigmoid", "relu"):
            raise InvalidInputError(f"unknown activation {activation_kind!r}")
        if clip_alpha is not None and not clip_alpha > 0:
            raise InvalidInputError("clip_alpha must be positive when set")
        for layer in layers:
            if layer.biases.shape != (layer.weights.shape[1],):
                raise InvalidInputError("bias length must match layer output width")
            if layer.mask is not None and layer.mask.shape != layer.weights.shape:
                raise InvalidInputError("mask shape must match weight shape")
        self.layers = layers
        self.activation_kind = activation_kind
        self.clip_alpha = None if clip_alpha is None else float(clip_alpha)
        self.topology = dict(topology) if topology else {}
        self.meta = dict(meta) if meta else {}
        self._layout = None

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    # ---- flat coefficient layout -------------------------------------

    def _param_layout(self):
        """[(layer_index, wslice, bslice, widx)] over trainable layers; cached."""
        if self._layout is None:
            items = []
            pos = 0
            for li, layer in enumerate(self.layers):
                if not layer.trainable:
                    continue
                if layer.mask is None:
                    nw = layer.weights.size
                    widx = None
                else:
                    widx = np.flatnonzero(layer.mask.ravel())
                    nw = widx.size
                nb = layer.biases.size
                items.append((li, slice(pos, pos + nw), slice(pos + nw, pos + nw + nb), widx))
                pos += nw + nb
            self._layout = (pos, items)
        return self._layout

    @property
    def num_coefficients(self) -> int:
        return self._param_layout()[0]

    def get_coefficients(self) -> np.ndarray:
        total, items = self._param_layout()
        out = np.empty(total)
        for li, ws, bs, widx in items:
            layer = self.layers[li]
            flat = layer.weights.ravel()
            out[ws] = flat if widx is None else flat[widx]
            out[bs] = layer.biases
        return out

    def set_coefficients(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        total, items = self._param_layout()
        if values.size != total:
            raise InvalidInputError(f"expected {total} coefficients, got {values.size}")
        for li, ws, bs, widx in items:
            layer = self.layers[li]
            if widx is None:
                layer.weights.ravel()[:] = values[ws]
            else:
                layer.weights.ravel()[widx] = values[ws]
            layer.biases[:] = values[bs]

    # ---- evaluation ---------------------------------------------------

    def _check_batch(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != self.input_dim:
            raise InvalidInputError(
                f"expected inputs of shape (n, {self.input_dim}), got {arr.shape}"
            )
        return arr

    def _forward_acts(self, xb: np.ndarray) -> list[np.ndarray]:
        acts = [xb]
        a = xb
        for layer in self.layers:
            z = a @ layer.weights
            z += layer.biases
            _activate_inplace(z, layer.activation)
            acts.append(z)
            a = z
        return acts

    def forward_batch(self, x) -> np.ndarray:
        return self._forward_acts(self._check_batch(x))[-1][:, 0]

    def forward(self, x) -> float:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidInputError("forward expects a single input vector")
        return float(self.forward_batch(arr[None, :])[0])

    def activations(self, x) -> list[np.ndarray]:
        """Post-activation vector of every layer for one input."""
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim != 1:
            raise InvalidInputError("activations expects a single input vector")
        acts = self._forward_acts(self._check_batch(arr[None, :]))
        return [a[0].copy() for a in acts[1:]]

    # ---- misc -----------------------------------------------------------

    def copy(self) -> "NeuralNet":
        return NeuralNet(
            [layer.copy() for layer in self.layers],
            self.activation_kind,
            self.clip_alpha,
            self.topology,
            self.meta,
        )

    def to_json(self) -> str:
        doc = {
            "format": NET_FORMAT,
            "topology": self.topology,
            "activation": self.activation_kind,
            "clip_alpha": self.clip_alpha,
            "layers": [
                {"weights": layer.weights.tolist(), "biases": layer.biases.tolist()}
                for layer in self.layers
            ],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "NeuralNet":
        doc = json.loads(text)
        if doc.get("format") != NET_FORMAT:
            raise InvalidInputError(f"unsupported network format {doc.get('format')!r}")
        topo = doc.get("topology", {})
        kind = topo.get("kind")
        if kind == "dense":
            net = build_dense(topo["widths"], doc["activation"], seed=0,
                              clip_alpha=doc.get("clip_alpha"))
        elif kind == "hierarchical":
            net = build_hierarchical(HierarchicalSpec(
                level=topo["level"], num_blocks=topo["num_blocks"], order=topo["order"],
                block_width=topo["block_width"], input_dim=topo["input_dim"],
                coef_bound=topo["coef_bound"]), seed=0)
        else:
            raise InvalidInputError(f"unknown topology kind {kind!r}")
        if len(doc["layers"]) != len(net.layers):
            raise InvalidInputError("layer count does not match topology")
        for layer, stored in zip(net.layers, doc["layers"]):
            w = np.asarray(stored["weights"], dtype=np.float64)
            b = np.asarray(stored["biases"], dtype=np.float64)
            if w.shape != layer.weights.shape or b.shape != layer.biases.shape:
                raise InvalidInputError("stored layer shape does not match topology")
            layer.weights[...] = w
            layer.biases[...] = b
        return net


# ---- architecture builders ----------------------------------------------


@dataclass(frozen=True)
class DenseArch:
    """Fully connected architecture: input_dim -> hidden widths -> 1."""

    input_dim: int
    hidden: tuple
    activation: str = "sigmoid"

    def build(self, seed: int) -> NeuralNet:
        widths = [self.input_dim, *self.hidden, 1]
        return build_dense(widths, self.activation, seed)


@dataclass(frozen=True)
class HierarchicalSpec:
    """Sparse hierarchical architecture.

    A level-0 block over d inputs is an affine combination of block_width
    outer sigmoid units, each fed by its own 4*order inner sigmoid units
    over the raw input.  A level-l network (l >= 1) sums num_blocks such
    blocks, each reading the outputs of `order` independent level-(l-1)
    sub-networks.  All coefficients are bounded by coef_bound.  A level-0
    network is a single block; num_blocks takes effect at levels >= 1.
    """

    level: int
    num_blocks: int
    order: int
    block_width: int
    input_dim: int
    coef_bound: float = 10.0

    def __post_init__(self):
        if self.level < 0 or self.num_blocks < 1 or self.order < 1 \
                or self.block_width < 1 or self.input_dim < 1:
            raise InvalidInputError(f"invalid hierarchical spec {self}")
        if not self.coef_bound > 0:
            raise InvalidInputError("coef_bound must be positive")

    def build(self, seed: int) -> NeuralNet:
        return build_hierarchical(self, seed)


def build_dense(widths, activation, seed, clip_alpha=None) -> NeuralNet:
    """Seeded dense network; hidden layers use `activation`, output is linear."""
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise InvalidInputError("need at least input and output widths")
    if any(w < 1 for w in widths):
        raise InvalidInputError("layer widths must be positive")
    if widths[-1] != 1:
        raise InvalidInputError("output width must be 1")
    if activation not in ("sigmoid", "relu"):
        raise InvalidInputError(f"unknown activation {activation!r}")
    rng = make_generator(seed)
    layers = []
    last = len(widths) - 2
    for i in range(len(widths) - 1):
        n_in, n_out = widths[i], widths[i + 1]
        w = _fan_uniform(rng, n_in, n_out, n_in, n_out)
        if clip_alpha is not None:
            np.clip(w, -clip_alpha, clip_alpha, out=w)
        layers.append(Layer(w, np.zeros(n_out),
                            activation if i < last else "linear"))
    return NeuralNet(layers, activation, clip_alpha,
                     topology={"kind": "dense", "widths": widths})


def _fan_uniform(rng, n_in, n_out, fan_in, fan_out):
    scale = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-scale, scale, size=(n_in, n_out))


def _block_diag_mask(blocks, in_size, out_size):
    """Boolean mask with `blocks` dense blocks of shape (in_size, out_size)."""
    mask = np.zeros((blocks * in_size, blocks * out_size), dtype=bool)
    for b in range(blocks):
        mask[b * in_size:(b + 1) * in_size, b * out_size:(b + 1) * out_size] = True
    return mask


@dataclass
class _LayerPlan:
    n_in: int
    n_out: int
    activation: str
    mask: np.ndarray | None
    fan: tuple
    trainable: bool = True
    fixed_weights: np.ndarray | None = None


def _plan_block_stack(copies, order, width, in_per_block, dense_input):
    """Layer plans for `copies` parallel level-0 blocks.

    Each block reads `in_per_block` inputs; with dense_input the first
    layer reads one shared input vector of length in_per_block instead
    of per-block slices.
    """
    inner = 4 * order * width
    if dense_input:
        first = _LayerPlan(in_per_block, copies * inner, "sigmoid", None,
                           (in_per_block, inner))
    else:
        first = _LayerPlan(copies * in_per_block, copies * inner, "sigmoid",
                           _block_diag_mask(copies, in_per_block, inner),
                           (in_per_block, inner))
    second = _LayerPlan(copies * inner, copies * width, "sigmoid",
                        _block_diag_mask(copies * width, 4 * order, 1),
                        (4 * order, 1))
    third = _LayerPlan(copies * width, copies, "linear",
                       None if copies == 1 else _block_diag_mask(copies, width, 1),
                       (width, 1))
    return [first, second, third]


def _plan_hierarchical(spec: HierarchicalSpec, level: int, copies: int):
    if level == 0:
        return _plan_block_stack(copies, spec.order, spec.block_width,
                                 spec.input_dim, dense_input=True)
    sub = _plan_hierarchical(spec, level - 1, copies * spec.num_blocks * spec.order)
    blocks = _plan_block_stack(copies * spec.num_blocks, spec.order,
                               spec.block_width, spec.order, dense_input=False)
    ones = np.zeros((copies * spec.num_blocks, copies))
    for c in range(copies):
        ones[c * spec.num_blocks:(c + 1) * spec.num_blocks, c] = 1.0
    summed = _LayerPlan(copies * spec.num_blocks, copies, "linear", None,
                        (spec.num_blocks, 1), trainable=False, fixed_weights=ones)
    return sub + blocks + [summed]


def build_hierarchical(spec: HierarchicalSpec, seed) -> NeuralNet:
    """Compile the hierarchical architecture into masked layers.

    Parallel sub-networks are stacked side by side with block-diagonal
    masks; the final sum over blocks is a frozen unit-weight layer that
    carries no trainable coefficients.
    """
    plans = _plan_hierarchical(spec, spec.level, 1)
    rng = make_generator(seed)
    layers = []
    for plan in plans:
        if not plan.trainable:
            layers.append(Layer(plan.fixed_weights.copy(), np.zeros(plan.n_out),
                                plan.activation, None, trainable=False))
            continue
        w = _fan_uniform(rng, plan.n_in, plan.n_out, *plan.fan)
        if plan.mask is not None:
            w[~plan.mask] = 0.0
        np.clip(w, -spec.coef_bound, spec.coef_bound, out=w)
        layers.append(Layer(w, np.zeros(plan.n_out), plan.activation, plan.mask))
    topo = {"kind": "hierarchical", "level": spec.level, "num_blocks": spec.num_blocks,
            "order": spec.order, "block_width": spec.block_width,
            "input_dim": spec.input_dim, "coef_bound": spec.coef_bound}
    meta = {"sub_layers": len(plans) - 4 if spec.level >= 1 else 0}
    return NeuralNet(layers, "sigmoid", spec.coef_bound, topology=topo, meta=meta)


# ---- training -------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Mini-batch Adam hyperparameters; epochs may be zero (no-op)."""

    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 800
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    init_scheme: str = "fan-uniform"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be positive")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be nonnegative")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise InvalidInputError("adam betas must lie in (0, 1)")
        if not self.adam_epsilon > 0:
            raise InvalidInputError("adam_epsilon must be positive")


def adam_step(param, grad, m, v, t, cfg: TrainConfig):
    """One bias-corrected Adam update; returns (new_param, m, v).

    Scalar reference implementation of the vectorized update inside
    train_mse: m_hat = m/(1-b1^t), v_hat = v/(1-b2^t),
    param -= lr * m_hat / (sqrt(v_hat) + eps).
    """
    m = cfg.adam_beta1 * m + (1 - cfg.adam_beta1) * grad
    v = cfg.adam_beta2 * v + (1 - cfg.adam_beta2) * grad * grad
    m_hat = m / (1 - cfg.adam_beta1 ** t)
    v_hat = v / (1 - cfg.adam_beta2 ** t)
    return param - cfg.learning_rate * m_hat / (math.sqrt(v_hat) + cfg.adam_epsilon), m, v


def train_mse(net: NeuralNet, inputs, targets, cfg: TrainConfig) -> NeuralNet:
    """Seeded-shuffled mini-batch Adam on mean squared error.

    Mutates `net` in place and returns it.  The last batch of an epoch
    may be short and is used as-is.  If net.clip_alpha is set, every
    coefficient is projected onto [-alpha, alpha] after each step.
    A non-finite batch loss aborts with the offending epoch index.
    """
    x = np.ascontiguousarray(np.asarray(inputs, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise InvalidInputError("training inputs must be a 2-D matrix")
    n = x.shape[0]
    if n < 1:
        raise InvalidInputError("training set is empty")
    if y.size != n:
        raise InvalidInputError("inputs and targets disagree on sample count")
    if x.shape[1] != net.input_dim:
        raise InvalidInputError(
            f"training inputs have {x.shape[1]} columns, net expects {net.input_dim}")
    if cfg.epochs == 0:
        return net

    total, items = net._param_layout()
    params = net.get_coefficients()
    all_layers = net.layers
    n_layers = len(all_layers)
    weights = [layer.weights for layer in all_layers]
    act_tags = [layer.activation for layer in all_layers]

    # Local weight/bias bindings: dense trainable layers read straight from
    # flat-parameter views (no per-step copy); masked layers are scattered
    # into after each update; frozen layers keep their fixed arrays.
    biases = [layer.biases for layer in all_layers]
    grads = np.empty(total)
    scatter = []  # (weights_flat_view, widx, wslice) for masked layers
    grad_sinks = [None] * n_layers  # (dense gW view or None, widx, wslice, bview)
    for li, ws, bs, widx in items:
        layer = all_layers[li]
        biases[li] = params[bs]
        if widx is None:
            weights[li] = params[ws].reshape(layer.weights.shape)
            grad_sinks[li] = (grads[ws].reshape(layer.weights.shape), None, ws, grads[bs])
        else:
            wflat = layer.weights.ravel()
            wflat[widx] = params[ws]
            scatter.append((wflat, widx, ws))
            grad_sinks[li] = (None, widx, ws, grads[bs])

    lr = cfg.learning_rate
    beta1, beta2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon
    alpha = net.clip_alpha
    m = np.zeros(total)
    v = np.zeros(total)
    buf1 = np.empty(total)
    buf2 = np.empty(total)
    rng = make_generator(cfg.seed)
    batch = cfg.batch_size
    step = 0

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        xs = x[perm]
        ys = y[perm]
        for start in range(0, n, batch):
            xb = xs[start:start + batch]
            yb = ys[start:start + batch]

            acts = [xb]
            a = xb
            for li in range(n_layers):
                z = a @ weights[li]
                z += biases[li]
                _activate_inplace(z, act_tags[li])
                acts.append(z)
                a = z

            resid = a[:, 0] - yb
            loss = float(resid @ resid) / resid.size
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch)

            np.multiply(resid, 2.0 / resid.size, out=resid)
            delta = resid[:, None]
            for li in range(n_layers - 1, -1, -1):
                sink = grad_sinks[li]
                if sink is not None:
                    gw_view, widx, ws, gb_view = sink
                    if gw_view is not None:
                        np.matmul(acts[li].T, delta, out=gw_view)
                    else:
                        grads[ws] = (acts[li].T @ delta).ravel()[widx]
                    np.sum(delta, axis=0, out=gb_view)
                if li > 0:
                    delta = delta @ weights[li].T
                    prev = acts[li]
                    tag = act_tags[li - 1]
                    if tag == "sigmoid":
                        delta *= prev
                        delta *= 1.0 - prev
                    elif tag == "relu":
                        delta *= prev > 0.0

            step += 1
            np.multiply(grads, 1.0 - beta1, out=buf1)
            m *= beta1
            m += buf1
            np.multiply(grads, grads, out=buf2)
            buf2 *= 1.0 - beta2
            v *= beta2
            v += buf2
            np.divide(v, 1.0 - beta2 ** step, out=buf2)
            np.sqrt(buf2, out=buf2)
            buf2 += eps
            np.divide(m, 1.0 - beta1 ** step, out=buf1)
            buf1 /= buf2
            buf1 *= lr
            params -= buf1
            if alpha is not None:
                np.clip(params, -alpha, alpha, out=params)
            for wflat, widx, ws in scatter:
                wflat[widx] = params[ws]

    net.set_coefficients(params)
    return net


def gradient(net: NeuralNet, x, target) -> np.ndarray:
    """Flat gradient of the single-example squared loss (f(x) - target)^2."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size != net.input_dim:
        raise InvalidInputError(
            f"expected an input vector of length {net.input_dim}, got shape {arr.shape}")
    xb = arr[None, :]
    acts = net._forward_acts(xb)
    resid = acts[-1][:, 0] - float(target)

    total, items = net._param_layout()
    grads = np.zeros(total)
    sinks = {li: (ws, bs, widx) for li, ws, bs, widx in items}

    delta = (2.0 * resid)[:, None]
    for li in range(len(net.layers) - 1, -1, -1):
        if li in sinks:
            ws, bs, widx = sinks[li]
            gw = acts[li].T @ delta
            grads[ws] = gw.ravel() if widx is None else gw.ravel()[widx]
            grads[bs] = delta.sum(axis=0)
        if li > 0:
            delta = delta @ net.layers[li].weights.T
            prev = acts[li]
            tag = net.layers[li - 1].activation
            if tag == "sigmoid":
                delta = delta * prev * (1.0 - prev)
            elif tag == "relu":
                delta = delta * (prev > 0.0)
    return grads
