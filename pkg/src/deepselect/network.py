"""Small fully connected autoencoder with exact reverse-mode gradients.

The encoder trunk applies leaky-rectifier hidden layers, then a linear
mean head and (optionally) a linear log-variance head at the bottleneck;
the decoder mirrors the trunk back to the input width.  Losses return
their gradients as a parallel parameter structure so a plain SGD step can
zip through; everything is float64 numpy for bit-reproducible training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deepselect.divergence import _ajsd_value_grad, _kld_value_grad, alpha_jsd_grad, kld_gaussian_grad, DiagGaussian

LEAKY_SLOPE = 0.01
VARIANCE_FLOOR = 1e-12

__all__ = [
    "LatentNet",
    "LatentCode",
    "init_net",
    "encode",
    "decode",
    "sample_latent",
    "reconstruction_loss",
    "regularizer_loss",
    "kld_regularizer_loss",
    "sgd_step",
    "net_zeros_like",
]


@dataclass
class LatentCode:
    """Bottleneck output: mean vector plus per-dimension variance.

    Variance is the all-ones vector when the log-variance head is
    disabled, and is floored at a tiny positive value otherwise.
    """

    mu: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.variance = np.maximum(np.asarray(self.variance, dtype=float), VARIANCE_FLOOR)
        if self.mu.shape != self.variance.shape:
            raise ValueError("mu and variance must have matching shapes")


@dataclass
class LatentNet:
    """Encoder trunk, bottleneck heads, and mirrored decoder."""

    enc_w: list = field(default_factory=list)
    enc_b: list = field(default_factory=list)
    mu_w: np.ndarray = None
    mu_b: np.ndarray = None
    logvar_w: np.ndarray | None = None
    logvar_b: np.ndarray | None = None
    dec_w: list = field(default_factory=list)
    dec_b: list = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.enc_w[0].shape[1] if self.enc_w else self.mu_w.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.mu_w.shape[0]

    @property
    def has_sigma_head(self) -> bool:
        return self.logvar_w is not None

    def params(self):
        """All parameter arrays in a fixed order."""
        out = [*self.enc_w, *self.enc_b, self.mu_w, self.mu_b]
        if self.has_sigma_head:
            out += [self.logvar_w, self.logvar_b]
        out += [*self.dec_w, *self.dec_b]
        return out


def init_net(dims, seed=None, sigma_head: bool = False) -> LatentNet:
    """Seeded scaled-uniform fan-in initialization for the given widths.

    dims = (input, hidden..., latent); the decoder mirrors the encoder.
    Biases start at zero.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"architecture needs at least (input, latent) positive dims, got {dims}")
    rng = np.random.default_rng(seed)

    def layer(n_out, n_in):
        bound = 1.0 / np.sqrt(n_in)
        return rng.uniform(-bound, bound, size=(n_out, n_in)), np.zeros(n_out)

    net = LatentNet()
    for a, b in zip(dims[:-2], dims[1:-1]):
        w, bias = layer(b, a)
        net.enc_w.append(w)
        net.enc_b.append(bias)
    net.mu_w, net.mu_b = layer(dims[-1], dims[-2])
    if sigma_head:
        net.logvar_w, net.logvar_b = layer(dims[-1], dims[-2])
    rev = dims[::-1]
    for a, b in zip(rev[:-1], rev[1:]):
        w, bias = layer(b, a)
        net.dec_w.append(w)
        net.dec_b.append(bias)
    return net


def net_zeros_like(net: LatentNet) -> LatentNet:
    zeros = LatentNet(
        enc_w=[np.zeros_like(w) for w in net.enc_w],
        enc_b=[np.zeros_like(b) for b in net.enc_b],
        mu_w=np.zeros_like(net.mu_w),
        mu_b=np.zeros_like(net.mu_b),
        dec_w=[np.zeros_like(w) for w in net.dec_w],
        dec_b=[np.zeros_like(b) for b in net.dec_b],
    )
    if net.has_sigma_head:
        zeros.logvar_w = np.zeros_like(net.logvar_w)
        zeros.logvar_b = np.zeros_like(net.logvar_b)
    return zeros


def _leaky(x):
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def _leaky_grad(x):
    return np.where(x > 0, 1.0, LEAKY_SLOPE)


def _encode_batch(net: LatentNet, x: np.ndarray):
    """Forward through the trunk and heads, keeping pre-activations."""
    h = x
    trunk_pre, trunk_in = [], []
    for w, b in zip(net.enc_w, net.enc_b):
        trunk_in.append(h)
        pre = h @ w.T + b
        trunk_pre.append(pre)
        h = _leaky(pre)
    mu = h @ net.mu_w.T + net.mu_b
    if net.has_sigma_head:
        logvar = h @ net.logvar_w.T + net.logvar_b
        var = np.exp(logvar)
    else:
        var = np.ones_like(mu)
    cache = {"trunk_in": trunk_in, "trunk_pre": trunk_pre, "h": h, "var": var}
    return mu, var, cache


def _decode_batch(net: LatentNet, z: np.ndarray):
    g = z
    pre_list, in_list = [], []
    last = len(net.dec_w) - 1
    for i, (w, b) in enumerate(zip(net.dec_w, net.dec_b)):
        in_list.append(g)
        pre = g @ w.T + b
        pre_list.append(pre)
        g = pre if i == last else _leaky(pre)
    return g, {"pre": pre_list, "inputs": in_list}


def _decoder_backward(net, cache, dy, grads):
    """Accumulate decoder gradients; returns gradient at the latent input."""
    last = len(net.dec_w) - 1
    delta = dy
    for i in range(last, -1, -1):
        if i != last:
            delta = delta * _leaky_grad(cache["pre"][i])
        grads.dec_w[i] += delta.T @ cache["inputs"][i]
        grads.dec_b[i] += delta.sum(axis=0)
        delta = delta @ net.dec_w[i]
    return delta


def _encoder_backward(net, cache, dmu, dlogvar, grads):
    """Accumulate head and trunk gradients from bottleneck gradients."""
    grads.mu_w += dmu.T @ cache["h"]
    grads.mu_b += dmu.sum(axis=0)
    dh = dmu @ net.mu_w
    if net.has_sigma_head and dlogvar is not None:
        grads.logvar_w += dlogvar.T @ cache["h"]
        grads.logvar_b += dlogvar.sum(axis=0)
        dh = dh + dlogvar @ net.logvar_w
    delta = dh
    for i in range(len(net.enc_w) - 1, -1, -1):
        delta = delta * _leaky_grad(cache["trunk_pre"][i])
        grads.enc_w[i] += delta.T @ cache["trunk_in"][i]
        grads.enc_b[i] += delta.sum(axis=0)
        delta = delta @ net.enc_w[i]


def encode(net: LatentNet, x) -> LatentCode:
    """Deterministic forward pass to the bottleneck distribution."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input dimension {x.shape[-1]} does not match network input {net.input_dim}")
    mu, var, _ = _encode_batch(net, x[None, :])
    return LatentCode(mu[0], var[0])


def decode(net: LatentNet, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != net.latent_dim:
        raise ValueError(f"latent dimension {z.shape[-1]} does not match network bottleneck {net.latent_dim}")
    y, _ = _decode_batch(net, z[None, :])
    return y[0]


def sample_latent(code: LatentCode, rng: np.random.Generator) -> np.ndarray:
    """One reparameterized draw: mu + sqrt(variance) * standard normal."""
    return code.mu + np.sqrt(code.variance) * rng.standard_normal(code.mu.shape)


def mse_loss_batch(net: LatentNet, x: np.ndarray):
    """Mean over the batch of 0.5*|x - reconstruction|^2, with gradients.

    Reconstruction decodes the latent mean (the deterministic pathway).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    mu, _, enc_cache = _encode_batch(net, x)
    y, dec_cache = _decode_batch(net, mu)
    diff = y - x
    loss = 0.5 * float((diff**2).sum()) / n
    grads = net_zeros_like(net)
    dz = _decoder_backward(net, dec_cache, diff / n, grads)
    _encoder_backward(net, enc_cache, dz, None, grads)
    return loss, grads


def reconstruction_loss(net: LatentNet, x):
    """Single-sample reconstruction loss and exact parameter gradients."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("reconstruction_loss expects a single input vector")
    if x.shape[0] != net.input_dim:
        raise ValueError(f"input dimension {x.shape[0]} does not match network input {net.input_dim}")
    return mse_loss_batch(net, x[None, :])


def regularizer_loss(code: LatentCode, component: DiagGaussian, alpha: float, lambda3: float):
    """Weighted skew-divergence penalty tying a code to its component.

    Returns (loss, d loss/d mu, d loss/d variance); lambda3 = 0 gives an
    exact zero loss and gradient.
    """
    if not 0.0 <= lambda3 <= 1.0:
        raise ValueError(f"lambda3 must lie in [0, 1], got {lambda3}")
    if lambda3 == 0.0:
        return 0.0, np.zeros_like(code.mu), np.zeros_like(code.variance)
    value, dmu, dvar = alpha_jsd_grad(DiagGaussian(code.mu, code.variance), component, alpha)
    return lambda3 * value, lambda3 * dmu, lambda3 * dvar


def kld_regularizer_loss(code: LatentCode, component: DiagGaussian, lambda3: float):
    """KLD variant of the clustering penalty, code in the first slot."""
    if not 0.0 <= lambda3 <= 1.0:
        raise ValueError(f"lambda3 must lie in [0, 1], got {lambda3}")
    if lambda3 == 0.0:
        return 0.0, np.zeros_like(code.mu), np.zeros_like(code.variance)
    value, dmu, dvar = kld_gaussian_grad(DiagGaussian(code.mu, code.variance), component)
    return lambda3 * value, lambda3 * dmu, lambda3 * dvar


def regularizer_loss_batch(net, x, comp_means, comp_vars, alpha, lambda3, kind="ajsd"):
    """Mean clustering penalty over a batch, backpropagated into the
    encoder (mean head, and log-variance head when present).

    comp_means/comp_vars hold the per-sample selected component.  The
    decoder receives no gradient; with lambda3 = 0 gradients are exactly
    zero.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    mu, var, cache = _encode_batch(net, x)
    grads = net_zeros_like(net)
    if lambda3 == 0.0:
        return 0.0, grads
    if kind == "ajsd":
        per_dim, dmu, dvar = _ajsd_value_grad(mu, var, comp_means, comp_vars, alpha)
    elif kind == "kld":
        per_dim, dmu, dvar = _kld_value_grad(mu, var, comp_means, comp_vars)
    else:
        raise ValueError(f"unknown regularizer kind {kind!r}")
    loss = lambda3 * float(per_dim.sum()) / n
    scale = lambda3 / n
    dlogvar = scale * dvar * cache["var"] if net.has_sigma_head else None
    _encoder_backward(net, cache, scale * dmu, dlogvar, grads)
    return loss, grads


def abc_loss_batch(net, x, nearest_means, lambda3):
    """Mean point-estimate penalty lambda3/2*|eta - mu|^2 over a batch,
    backpropagated into the encoder through the latent mean."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[0]
    mu, _, cache = _encode_batch(net, x)
    grads = net_zeros_like(net)
    diff = mu - nearest_means
    loss = 0.5 * lambda3 * float((diff**2).sum()) / n
    _encoder_backward(net, cache, (lambda3 / n) * diff, None, grads)
    return loss, grads


def sgd_step(net: LatentNet, grads: LatentNet, learning_rate: float) -> LatentNet:
    """Plain gradient-descent update; returns a new network."""
    if learning_rate < 0:
        raise ValueError("learning rate must be nonnegative")

    def step(w, g):
        if w.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {w.shape}")
        return w - learning_rate * g

    out = LatentNet(
        enc_w=[step(w, g) for w, g in zip(net.enc_w, grads.enc_w)],
        enc_b=[step(b, g) for b, g in zip(net.enc_b, grads.enc_b)],
        mu_w=step(net.mu_w, grads.mu_w),
        mu_b=step(net.mu_b, grads.mu_b),
        dec_w=[step(w, g) for w, g in zip(net.dec_w, grads.dec_w)],
        dec_b=[step(b, g) for b, g in zip(net.dec_b, grads.dec_b)],
    )
    if net.has_sigma_head:
        out.logvar_w = step(net.logvar_w, grads.logvar_w)
        out.logvar_b = step(net.logvar_b, grads.logvar_b)
    return out
