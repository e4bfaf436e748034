"""Minimal tensor/layer machinery for the velocity-window autoencoder.

Everything runs on double-precision numpy arrays: dilated 1D convolution,
batch normalization, ReLU, fully-connected layers, and exact reverse-mode
gradients of the MSE loss. Layers preserve sequence length through padding
so the network maps [batch, 1, L] to [batch, 1, L].
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import DegenerateBatchError, ShapeError

PADDING_MODES = ("symmetric", "causal")


def _uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _conv_windows(x_padded: np.ndarray, kernel_size: int, dilation: int) -> np.ndarray:
    """Strided view [B, C, L, k] of dilated windows over a padded input."""
    b, c, lp = x_padded.shape
    l_out = lp - dilation * (kernel_size - 1)
    s0, s1, s2 = x_padded.strides
    return np.lib.stride_tricks.as_strided(
        x_padded,
        shape=(b, c, l_out, kernel_size),
        strides=(s0, s1, s2, s2 * dilation),
        writeable=False,
    )


class Conv1d:
    """Dilated 1D cross-correlation with length-preserving zero padding.

    ``symmetric`` pads d*(k-1)/2 on each side (k must be odd); ``causal``
    pads d*(k-1) on the left only, so output i never sees inputs beyond i.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 dilation: int = 1, padding: str = "symmetric",
                 rng: Optional[np.random.Generator] = None):
        if padding not in PADDING_MODES:
            raise ShapeError(f"unknown padding mode {padding!r}")
        if padding == "symmetric" and (dilation * (kernel_size - 1)) % 2 != 0:
            raise ShapeError("symmetric padding needs an odd kernel")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size
        self.weight = _uniform_fan_in(rng, (out_channels, in_channels, kernel_size), fan_in)
        self.bias = _uniform_fan_in(rng, (out_channels,), fan_in)

    def _pad_amounts(self) -> tuple[int, int]:
        total = self.dilation * (self.kernel_size - 1)
        if self.padding == "symmetric":
            return total // 2, total // 2
        return total, 0

    def forward(self, x: np.ndarray):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(
                f"conv expects [B, {self.in_channels}, L], got {x.shape}"
            )
        pl, pr = self._pad_amounts()
        xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
        win = _conv_windows(xp, self.kernel_size, self.dilation)
        y = np.einsum("bclk,ock->bol", win, self.weight, optimize=True)
        y += self.bias[None, :, None]
        return y, (xp, win)

    def backward(self, g: np.ndarray, cache):
        xp, win = cache
        pl, _ = self._pad_amounts()
        l_out = g.shape[2]
        gw = np.einsum("bol,bclk->ock", g, win, optimize=True)
        gb = g.sum(axis=(0, 2))
        gxp = np.zeros_like(xp)
        for j in range(self.kernel_size):
            off = j * self.dilation
            gxp[:, :, off:off + l_out] += np.einsum(
                "bol,oc->bcl", g, self.weight[:, :, j], optimize=True
            )
        gx = gxp[:, :, pl:pl + l_out]
        return gx, {"weight": gw, "bias": gb}


class BatchNorm1d:
    """Per-channel batch normalization over [B, C, L] inputs.

    Train mode normalizes with biased batch statistics and updates running
    stats (unbiased variance, momentum as the new-value weight); eval mode
    is a fixed affine map through the running statistics.
    """

    def __init__(self, num_channels: int, momentum: float = 0.1, epsilon: float = 1e-5):
        self.num_channels = num_channels
        self.momentum = momentum
        self.epsilon = epsilon
        self.gamma = np.ones(num_channels)
        self.beta = np.zeros(num_channels)
        self.running_mean = np.zeros(num_channels)
        self.running_var = np.ones(num_channels)

    def forward(self, x: np.ndarray, train: bool, update_running: bool = True):
        if x.ndim != 3 or x.shape[1] != self.num_channels:
            raise ShapeError(f"batchnorm expects [B, {self.num_channels}, L], got {x.shape}")
        if train:
            n = x.shape[0] * x.shape[2]
            if n < 2:
                raise DegenerateBatchError("train-mode batch norm needs batch*length >= 2")
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))  # biased
            if update_running:
                unbiased = var * n / (n - 1)
                self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
                self.running_var = (1 - self.momentum) * self.running_var + self.momentum * unbiased
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        y = self.gamma[None, :, None] * xhat + self.beta[None, :, None]
        return y, (xhat, inv_std, train)

    def backward(self, g: np.ndarray, cache):
        xhat, inv_std, train = cache
        ggamma = (g * xhat).sum(axis=(0, 2))
        gbeta = g.sum(axis=(0, 2))
        scale = (self.gamma * inv_std)[None, :, None]
        if train:
            g_mean = g.mean(axis=(0, 2))[None, :, None]
            gx_mean = (g * xhat).mean(axis=(0, 2))[None, :, None]
            gx = scale * (g - g_mean - xhat * gx_mean)
        else:
            gx = scale * g
        return gx, {"gamma": ggamma, "beta": gbeta}


class Linear:
    """Fully connected layer over [B, in] inputs."""

    def __init__(self, in_features: int, out_features: int,
                 rng: Optional[np.random.Generator] = None):
        self.in_features = in_features
        self.out_features = out_features
        rng = rng or np.random.default_rng(0)
        self.weight = _uniform_fan_in(rng, (out_features, in_features), in_features)
        self.bias = _uniform_fan_in(rng, (out_features,), in_features)

    def forward(self, x: np.ndarray):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"linear expects [B, {self.in_features}], got {x.shape}")
        return x @ self.weight.T + self.bias, x

    def backward(self, g: np.ndarray, cache):
        x = cache
        gw = g.T @ x
        gb = g.sum(axis=0)
        gx = g @ self.weight
        return gx, {"weight": gw, "bias": gb}


def relu(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(g: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return g * mask


def mse_loss(output: np.ndarray, target: np.ndarray) -> float:
    """Mean over all elements of the squared difference."""
    if output.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {output.shape} vs {target.shape}")
    d = output - target
    return float(np.mean(d * d))


class TcnBlock:
    """Conv1d -> BatchNorm1d -> ReLU."""

    def __init__(self, in_channels, out_channels, kernel_size, dilation, padding,
                 bn_momentum, bn_epsilon, rng):
        self.conv = Conv1d(in_channels, out_channels, kernel_size, dilation, padding, rng)
        self.bn = BatchNorm1d(out_channels, bn_momentum, bn_epsilon)

    def forward(self, x, train, update_running=True):
        y, c_conv = self.conv.forward(x)
        y, c_bn = self.bn.forward(y, train, update_running)
        y, mask = relu(y)
        return y, (c_conv, c_bn, mask)

    def backward(self, g, cache):
        c_conv, c_bn, mask = cache
        g = relu_backward(g, mask)
        g, bn_grads = self.bn.backward(g, c_bn)
        g, conv_grads = self.conv.backward(g, c_conv)
        return g, conv_grads, bn_grads


class TcnAutoencoder:
    """Temporal-convolutional autoencoder over [B, 1, L] velocity windows.

    Default geometry: encoder blocks 1->4 (k=5, d=1) and 4->8 (k=5, d=2),
    flatten to 8*L, linear bottleneck of width 10, mirrored decoder back to
    one channel. Every block, including the last, ends in ReLU, so outputs
    are non-negative like the velocities they reconstruct.
    """

    def __init__(self, seq_len: int = 36, encoder_channels: tuple[int, ...] = (4, 8),
                 kernel_size: int = 5, dilations: tuple[int, ...] = (1, 2),
                 bottleneck: int = 10, padding: str = "symmetric", seed: int = 0,
                 bn_momentum: float = 0.1, bn_epsilon: float = 1e-5):
        if len(encoder_channels) != len(dilations):
            raise ShapeError("need one dilation per encoder block")
        self.seq_len = seq_len
        self.encoder_channels = tuple(encoder_channels)
        self.kernel_size = kernel_size
        self.dilations = tuple(dilations)
        self.bottleneck = bottleneck
        self.padding = padding
        self.seed = seed
        self.bn_momentum = bn_momentum
        self.bn_epsilon = bn_epsilon

        rng = np.random.default_rng(np.random.PCG64(seed))
        mk = lambda cin, cout, d: TcnBlock(
            cin, cout, kernel_size, d, padding, bn_momentum, bn_epsilon, rng
        )
        chans = (1,) + self.encoder_channels
        self.encoder = [mk(chans[i], chans[i + 1], dilations[i]) for i in range(len(dilations))]
        flat = self.encoder_channels[-1] * seq_len
        self.fc_in = Linear(flat, bottleneck, rng)
        self.fc_out = Linear(bottleneck, flat, rng)
        rev = tuple(reversed(chans))
        self.decoder = [mk(rev[i], rev[i + 1], dilations[i]) for i in range(len(dilations))]

    # -- parameter access ---------------------------------------------------

    def _layers(self):
        for i, blk in enumerate(self.encoder):
            yield f"enc{i}", blk
        yield "fc_in", self.fc_in
        yield "fc_out", self.fc_out
        for i, blk in enumerate(self.decoder):
            yield f"dec{i}", blk

    def parameters(self) -> dict[str, np.ndarray]:
        """Named parameter arrays, in forward order (live references)."""
        out: dict[str, np.ndarray] = {}
        for name, layer in self._layers():
            if isinstance(layer, TcnBlock):
                out[f"{name}.conv.weight"] = layer.conv.weight
                out[f"{name}.conv.bias"] = layer.conv.bias
                out[f"{name}.bn.gamma"] = layer.bn.gamma
                out[f"{name}.bn.beta"] = layer.bn.beta
            else:
                out[f"{name}.weight"] = layer.weight
                out[f"{name}.bias"] = layer.bias
        return out

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        current = self.parameters()[name]
        if current.shape != value.shape:
            raise ShapeError(f"{name}: expected shape {current.shape}, got {value.shape}")
        current[...] = value

    def running_stats(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for name, layer in self._layers():
            if isinstance(layer, TcnBlock):
                out[f"{name}.bn.running_mean"] = layer.bn.running_mean
                out[f"{name}.bn.running_var"] = layer.bn.running_var
        return out

    def set_running_stat(self, name: str, value: np.ndarray) -> None:
        stats = self.running_stats()
        if name not in stats:
            raise ShapeError(f"unknown running stat {name!r}")
        if stats[name].shape != value.shape:
            raise ShapeError(f"{name}: expected shape {stats[name].shape}, got {value.shape}")
        block_name, _, stat = name.split(".")
        blk = dict(self._layers())[block_name]
        setattr(blk.bn, stat, np.array(value, dtype=float))

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def architecture(self) -> dict:
        return {
            "sequence_length": self.seq_len,
            "encoder_channels": list(self.encoder_channels),
            "kernel_size": self.kernel_size,
            "dilations": list(self.dilations),
            "bottleneck": self.bottleneck,
            "padding": self.padding,
            "bn_momentum": self.bn_momentum,
            "bn_epsilon": self.bn_epsilon,
        }

    # -- execution ------------------------------------------------------------

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.seq_len:
            raise ShapeError(f"expected input [B, 1, {self.seq_len}], got {x.shape}")
        return x

    def forward(self, x: np.ndarray, train: bool = False,
                update_running: Optional[bool] = None) -> np.ndarray:
        y, _ = self._forward(x, train,
                             update_running if update_running is not None else train)
        return y

    def _forward(self, x: np.ndarray, train: bool, update_running: bool):
        x = self._check_input(x)
        caches = []
        h = x
        for blk in self.encoder:
            h, c = blk.forward(h, train, update_running)
            caches.append(c)
        b = h.shape[0]
        flat_shape = h.shape
        h = h.reshape(b, -1)
        h, c = self.fc_in.forward(h)
        caches.append(c)
        h, c = self.fc_out.forward(h)
        caches.append(c)
        h = h.reshape(flat_shape)
        for blk in self.decoder:
            h, c = blk.forward(h, train, update_running)
            caches.append(c)
        return h, caches

    def forward_backward(self, x: np.ndarray, target: np.ndarray, train: bool = True,
                         update_running: Optional[bool] = None):
        """Forward pass plus exact gradients of mse_loss w.r.t. every parameter.

        Returns (output, loss, gradient tape). Gradients flow through the
        train-mode batch statistics when ``train`` is set.
        """
        target = np.asarray(target, dtype=float)
        out, caches = self._forward(
            x, train, update_running if update_running is not None else train
        )
        if out.shape != target.shape:
            raise ShapeError(f"target shape {target.shape} != output {out.shape}")
        loss = mse_loss(out, target)
        g = 2.0 * (out - target) / out.size

        grads: dict[str, np.ndarray] = {}
        ci = len(caches) - 1
        for i in range(len(self.decoder) - 1, -1, -1):
            g, conv_g, bn_g = self.decoder[i].backward(g, caches[ci])
            grads[f"dec{i}.conv.weight"] = conv_g["weight"]
            grads[f"dec{i}.conv.bias"] = conv_g["bias"]
            grads[f"dec{i}.bn.gamma"] = bn_g["gamma"]
            grads[f"dec{i}.bn.beta"] = bn_g["beta"]
            ci -= 1
        b = g.shape[0]
        flat_shape = g.shape
        g = g.reshape(b, -1)
        g, fc_g = self.fc_out.backward(g, caches[ci])
        grads["fc_out.weight"] = fc_g["weight"]
        grads["fc_out.bias"] = fc_g["bias"]
        ci -= 1
        g, fc_g = self.fc_in.backward(g, caches[ci])
        grads["fc_in.weight"] = fc_g["weight"]
        grads["fc_in.bias"] = fc_g["bias"]
        ci -= 1
        g = g.reshape(flat_shape[0], self.encoder_channels[-1], self.seq_len)
        for i in range(len(self.encoder) - 1, -1, -1):
            g, conv_g, bn_g = self.encoder[i].backward(g, caches[ci])
            grads[f"enc{i}.conv.weight"] = conv_g["weight"]
            grads[f"enc{i}.conv.bias"] = conv_g["bias"]
            grads[f"enc{i}.bn.gamma"] = bn_g["gamma"]
            grads[f"enc{i}.bn.beta"] = bn_g["beta"]
            ci -= 1
        return out, loss, grads
