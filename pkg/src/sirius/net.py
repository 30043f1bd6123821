"""Fourier-feature SIREN coordinate network with hand-written backprop.

The network maps a 2-D time-frequency coordinate, lifted through a fixed
Gaussian random Fourier embedding, to six real outputs (real/imaginary
parts of the main channel tap and the two adjacent interference taps).
Reverse-mode gradients and the Adam optimizer are implemented here
directly: the model is a small fixed-topology MLP, so a general autodiff
graph would buy nothing, and the explicit code is what the finite-
difference checks certify. Everything runs in float64.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _fastmath

DEFAULT_MAPPING_SIZE = 128
DEFAULT_RFF_SCALE = 0.5
DEFAULT_HIDDEN_DIM = 64
DEFAULT_HIDDEN_LAYERS = 4
DEFAULT_OMEGA = 30.0
OUTPUT_DIM = 6


@dataclass
class FourierMapping:
    """Fixed random Fourier embedding c -> [cos(2 pi B c), sin(2 pi B c)]."""

    b_matrix: np.ndarray  # (M, 2)
    scale: float

    @property
    def mapping_size(self) -> int:
        return self.b_matrix.shape[0]

    @property
    def output_dim(self) -> int:
        return 2 * self.mapping_size

    @classmethod
    def sample(cls, mapping_size: int, scale: float, seed) -> "FourierMapping":
        rng = np.random.default_rng(seed)
        return cls(b_matrix=scale * rng.standard_normal((mapping_size, 2)), scale=scale)


def rff_map(coords: np.ndarray, fm: FourierMapping) -> np.ndarray:
    """Embed coordinates (..., 2) into (..., 2M): cosines first, then sines."""
    coords = np.asarray(coords, dtype=float)
    proj = 2.0 * np.pi * (coords @ fm.b_matrix.T)
    return np.concatenate([_fastmath.cos(proj), _fastmath.sin(proj)], axis=-1)


class SirenNetwork:
    """Sine-activated MLP with a linear readout.

    layer_dims lists every width, input through output, e.g.
    [256, 64, 64, 64, 64, 6] for the default estimator backbone. All
    layers except the last apply sin(omega * (W z + b)).
    """

    def __init__(
        self,
        layer_dims,
        omega_first: float = DEFAULT_OMEGA,
        omega_hidden: float = DEFAULT_OMEGA,
    ):
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dims")
        self.layer_dims = list(layer_dims)
        self.omega_first = float(omega_first)
        self.omega_hidden = float(omega_hidden)
        self.weights = [
            np.zeros((layer_dims[i], layer_dims[i + 1])) for i in range(len(layer_dims) - 1)
        ]
        self.biases = [np.zeros(layer_dims[i + 1]) for i in range(len(layer_dims) - 1)]

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def omega(self, layer: int) -> float:
        return self.omega_first if layer == 0 else self.omega_hidden

    def parameters(self):
        """Flat list [W0, b0, W1, b1, ...] of live arrays."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    @classmethod
    def default(cls) -> "SirenNetwork":
        dims = [2 * DEFAULT_MAPPING_SIZE] + [DEFAULT_HIDDEN_DIM] * DEFAULT_HIDDEN_LAYERS
        dims.append(OUTPUT_DIM)
        return cls(dims)


def siren_init(net: SirenNetwork, seed) -> SirenNetwork:
    """Uniform sine-layer initialization; biases zero; deterministic per seed.

    First layer is U(+-1/fan_in), later layers U(+-sqrt(6/fan_in)/omega),
    which keeps the sine arguments near unit variance layer to layer.
    """
    rng = np.random.default_rng(seed)
    for l in range(net.num_layers):
        fan_in = net.layer_dims[l]
        if l == 0:
            bound = 1.0 / fan_in
        else:
            bound = np.sqrt(6.0 / fan_in) / net.omega_hidden
        net.weights[l][:] = rng.uniform(-bound, bound, size=net.weights[l].shape)
        net.biases[l][:] = 0.0
    return net


class Workspace:
    """Reusable forward/backward buffers for one (net, batch size) pair.

    Training runs thousands of identically shaped passes; recycling the
    multi-megabyte activation buffers avoids repeated large allocations.
    """

    def __init__(self, net: SirenNetwork, batch_size: int):
        self.batch_size = batch_size
        dims = net.layer_dims
        n_hidden = net.num_layers - 1
        self.args = [np.empty((batch_size, dims[l + 1])) for l in range(n_hidden)]
        self.zs = [np.empty((batch_size, dims[l + 1])) for l in range(n_hidden)]
        self.out = np.empty((batch_size, dims[-1]))
        self.dz = [np.empty((batch_size, dims[l + 1])) for l in range(n_hidden)]
        self.scaled_w = [np.empty_like(net.weights[l]) for l in range(n_hidden)]
        self.grads = [np.empty_like(p) for p in net.parameters()]


def forward(net: SirenNetwork, features: np.ndarray, want_cache: bool = False,
            workspace: Workspace = None):
    """Batched forward pass; features is (B, layer_dims[0]).

    With want_cache the per-layer sine arguments and layer inputs are
    returned for backward(). Passing a Workspace of matching batch size
    reuses its buffers (the returned arrays then alias the workspace).
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if features.shape[1] != net.layer_dims[0]:
        raise ValueError(
            f"feature dim {features.shape[1]} != layer input {net.layer_dims[0]}"
        )
    ws = workspace
    if ws is not None and ws.batch_size != features.shape[0]:
        raise ValueError("workspace batch size mismatch")
    n_hidden = net.num_layers - 1
    args = []
    inputs = [features]
    z = features
    for l in range(n_hidden):
        omega = net.omega(l)
        if ws is None:
            a = np.empty((features.shape[0], net.layer_dims[l + 1]))
            z_next = np.empty_like(a)
            w_s = omega * net.weights[l]
        else:
            a = ws.args[l]
            z_next = ws.zs[l]
            w_s = np.multiply(net.weights[l], omega, out=ws.scaled_w[l])
        # a = omega * (z W + b), computed with omega folded into W and b
        np.matmul(z, w_s, out=a)
        a += omega * net.biases[l]
        z = _fastmath.sin(a, out=z_next)
        args.append(a)
        inputs.append(z)
    out = ws.out if ws is not None else np.empty((features.shape[0], net.layer_dims[-1]))
    np.matmul(z, net.weights[-1], out=out)
    out += net.biases[-1]
    if want_cache:
        return out, (inputs, args)
    return out


def backward(net: SirenNetwork, cache, grad_out: np.ndarray,
             workspace: Workspace = None):
    """Exact gradients of sum(grad_out * out) w.r.t. every weight and bias.

    cache comes from forward(..., want_cache=True); grad_out is (B, out).
    Returns [dW0, db0, dW1, db1, ...] matching parameters(). With a
    workspace, the returned gradient arrays alias its buffers and the
    cached sine arguments are consumed.
    """
    inputs, args = cache
    grad_out = np.atleast_2d(np.asarray(grad_out, dtype=float))
    ws = workspace
    if ws is None:
        grads = [None] * (2 * net.num_layers)
        grads[-2] = inputs[-1].T @ grad_out
        grads[-1] = grad_out.sum(axis=0)
    else:
        grads = ws.grads
        np.matmul(inputs[-1].T, grad_out, out=grads[-2])
        grad_out.sum(axis=0, out=grads[-1])
    dz = grad_out @ net.weights[-1].T
    for l in range(net.num_layers - 2, -1, -1):
        # da = dz * omega * cos(arg); reuses the cached arg buffer
        da = _fastmath.cos(args[l], out=args[l] if ws is not None else None)
        da *= net.omega(l)
        da *= dz
        if ws is None:
            grads[2 * l] = inputs[l].T @ da
            grads[2 * l + 1] = da.sum(axis=0)
            if l > 0:
                dz = da @ net.weights[l].T
        else:
            np.matmul(inputs[l].T, da, out=grads[2 * l])
            da.sum(axis=0, out=grads[2 * l + 1])
            if l > 0:
                dz = np.matmul(da, net.weights[l].T, out=ws.dz[l - 1])
    return grads


@dataclass
class AdamState:
    """Adam moment accumulators; shapes mirror the parameter list."""

    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate: float = 5e-4) -> "AdamState":
        state = cls(learning_rate=learning_rate)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, in place on params."""
    if len(params) != len(state.m):
        raise ValueError("parameter/state length mismatch")
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def save_params(net: SirenNetwork, path):
    """Parameter snapshot as an npz of named arrays (w0, b0, w1, ...)."""
    arrays = {}
    for l in range(net.num_layers):
        arrays[f"w{l}"] = net.weights[l]
        arrays[f"b{l}"] = net.biases[l]
    np.savez(path, **arrays)


def load_params(net: SirenNetwork, path):
    with np.load(path) as data:
        for l in range(net.num_layers):
            net.weights[l][:] = data[f"w{l}"]
            net.biases[l][:] = data[f"b{l}"]
    return net
