"""Stateful layer wrappers and the experiment network architectures.

A Model owns named parameters (every parameter is a complex tensor; real
parameters keep a zero imaginary plane) plus batch-norm running buffers.
Each training step binds parameters onto a fresh tape, runs forward, and
collects per-parameter gradients after backward.
"""

from __future__ import annotations

import numpy as np

from . import activations as act
from . import layers as L
from .autodiff import Tape, Var
from .checkpoint import load_checkpoint, save_checkpoint
from .initializers import conv_fans, init_tensor
from .tensor import ComplexTensor, Rng


class Param:
    __slots__ = ("value",)

    def __init__(self, value: ComplexTensor):
        self.value = value


def real_param(data: np.ndarray) -> Param:
    data = np.asarray(data, dtype=np.float64)
    return Param(ComplexTensor(data, np.zeros_like(data)))


class Layer:
    """Base: subclasses define params/buffers and forward(x, train)."""

    def params(self) -> dict:
        return {}

    def buffers(self) -> dict:
        return {}

    def load_buffers(self, items: dict):
        pass

    def bind(self, tape: Tape):
        self._v = {name: tape.leaf(p.value, requires_grad=True)
                   for name, p in self.params().items()}

    def forward(self, x: Var, train: bool) -> Var:
        raise NotImplementedError


class ComplexConv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel=(3, 3), stride=(1, 1),
                 padding=(0, 0), rng: Rng = None, init="rayleigh_phase"):
        kh, kw = kernel
        fan_in, fan_out = conv_fans(out_ch, in_ch, kh, kw)
        self.stride = stride
        self.padding = padding
        self.w = Param(init_tensor(init, (out_ch, in_ch, kh, kw),
                                   fan_in, fan_out, rng))
        self.b = Param(ComplexTensor.zeros((out_ch,)))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        return L.complex_conv2d(x, self._v["w"], self._v["b"],
                                self.stride, self.padding)


class ComplexLinear(Layer):
    def __init__(self, d_in, d_out, rng: Rng = None, init="rayleigh_phase"):
        self.w = Param(init_tensor(init, (d_out, d_in), d_in, d_out, rng))
        self.b = Param(ComplexTensor.zeros((d_out,)))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        return L.complex_linear(x, self._v["w"], self._v["b"])


class ComplexBatchNorm(Layer):
    """Whitening batch norm; gamma starts at diag(1/sqrt(2)) so the total
    variance of Re + Im starts at one."""

    def __init__(self, channels, lam=1e-5, momentum=0.1, gamma_mode="matrix"):
        self.gamma_mode = gamma_mode
        self.state = L.BatchNormState(channels, lam=lam, momentum=momentum)
        if gamma_mode == "scalar":
            self.g_rr = real_param(np.ones(channels))
            self.g_ri = None
            self.g_ii = None
        else:
            self.g_rr = real_param(np.full(channels, 1.0 / np.sqrt(2.0)))
            self.g_ri = real_param(np.zeros(channels))
            self.g_ii = real_param(np.full(channels, 1.0 / np.sqrt(2.0)))
        self.beta = Param(ComplexTensor.zeros((channels,)))

    def params(self):
        p = {"g_rr": self.g_rr, "beta": self.beta}
        if self.gamma_mode == "matrix":
            p["g_ri"] = self.g_ri
            p["g_ii"] = self.g_ii
        return p

    def buffers(self):
        return {
            "running_mean": self.state.running_mean,
            "running_vrr": ComplexTensor(self.state.running_vrr,
                                         np.zeros_like(self.state.running_vrr)),
            "running_vri": ComplexTensor(self.state.running_vri,
                                         np.zeros_like(self.state.running_vri)),
            "running_vii": ComplexTensor(self.state.running_vii,
                                         np.zeros_like(self.state.running_vii)),
        }

    def load_buffers(self, items):
        self.state.running_mean = items["running_mean"]
        self.state.running_vrr = items["running_vrr"].real.copy()
        self.state.running_vri = items["running_vri"].real.copy()
        self.state.running_vii = items["running_vii"].real.copy()

    def forward(self, x, train):
        gri = self._v.get("g_ri")
        gii = self._v.get("g_ii")
        if train:
            out, stats = L.complex_batchnorm_train(
                x, self._v["g_rr"], gri, gii, self._v["beta"],
                self.state.lam, self.gamma_mode)
            self.state.update(stats)
            return out
        return L.complex_batchnorm_eval(
            x, self.state, self._v["g_rr"], gri, gii, self._v["beta"],
            self.gamma_mode)


class MagMaxPool2d(Layer):
    def __init__(self, kernel=(2, 2), stride=None):
        self.kernel = kernel
        self.stride = stride or kernel

    def forward(self, x, train):
        return L.complex_maxpool_mag(x, self.kernel, self.stride)


class ComplexAvgPool2d(Layer):
    def __init__(self, kernel=(2, 2), stride=None):
        self.kernel = kernel
        self.stride = stride or kernel

    def forward(self, x, train):
        return L.complex_avgpool(x, self.kernel, self.stride)


class Activation(Layer):
    """Config-dispatched activation; modrelu carries a per-channel bias."""

    def __init__(self, kind, channels=None, alpha=1.0):
        self.kind = kind
        self.alpha = alpha
        self.b = None
        if kind == "modrelu":
            if channels is None:
                raise ValueError("modrelu needs the channel count")
            self.b = real_param(np.zeros(channels))

    def params(self):
        return {"b": self.b} if self.b is not None else {}

    def forward(self, x, train):
        b = self._v.get("b")
        return act.apply_activation(self.kind, x, b, self.alpha)


class Flatten(Layer):
    def forward(self, x, train):
        return L.flatten(x)


class AbsLogSoftmax(Layer):
    def forward(self, x, train):
        return L.abs_logsoftmax_head(x)


class RealConv2d(Layer):
    def __init__(self, in_ch, out_ch, kernel=(3, 3), stride=(1, 1),
                 padding=(0, 0), rng: Rng = None):
        kh, kw = kernel
        fan_in = in_ch * kh * kw
        bound = np.sqrt(6.0 / fan_in) / np.sqrt(2.0)   # He-style uniform
        self.stride = stride
        self.padding = padding
        self.w = real_param(rng.uniform((out_ch, in_ch, kh, kw), -bound, bound))
        self.b = real_param(np.zeros(out_ch))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        return L.real_conv2d(x, self._v["w"], self._v["b"],
                             self.stride, self.padding)


class RealLinear(Layer):
    def __init__(self, d_in, d_out, rng: Rng = None):
        bound = np.sqrt(6.0 / d_in) / np.sqrt(2.0)
        self.w = real_param(rng.uniform((d_out, d_in), -bound, bound))
        self.b = real_param(np.zeros(d_out))

    def params(self):
        return {"w": self.w, "b": self.b}

    def forward(self, x, train):
        return L.real_linear(x, self._v["w"], self._v["b"])


class RealBatchNorm(Layer):
    def __init__(self, channels, lam=1e-5, momentum=0.1):
        self.lam = lam
        self.momentum = momentum
        self.gamma = real_param(np.ones(channels))
        self.beta = real_param(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {
            "running_mean": ComplexTensor(self.running_mean,
                                          np.zeros_like(self.running_mean)),
            "running_var": ComplexTensor(self.running_var,
                                         np.zeros_like(self.running_var)),
        }

    def load_buffers(self, items):
        self.running_mean = items["running_mean"].real.copy()
        self.running_var = items["running_var"].real.copy()

    def forward(self, x, train):
        if train:
            out, stats = L.real_batchnorm_train(
                x, self._v["gamma"], self._v["beta"], self.lam)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * stats["mean"]
            self.running_var = (1 - m) * self.running_var + m * stats["var"]
            return out
        return L.real_batchnorm_eval(x, self.running_mean, self.running_var,
                                     self._v["gamma"], self._v["beta"], self.lam)


class RealRelu(Layer):
    def forward(self, x, train):
        return L.relu(x)


class RealMaxPool2d(Layer):
    def __init__(self, kernel=(2, 2), stride=None):
        self.kernel = kernel
        self.stride = stride or kernel

    def forward(self, x, train):
        return L.real_maxpool(x, self.kernel, self.stride)


class RealLogSoftmax(Layer):
    def forward(self, x, train):
        return L.real_logsoftmax(x)


class Model:
    """Named sequence of layers with checkpointable state."""

    def __init__(self, named_layers):
        self.layers = list(named_layers)

    def bind(self, tape: Tape):
        for _, layer in self.layers:
            layer.bind(tape)

    def forward(self, x: Var, train: bool) -> Var:
        for _, layer in self.layers:
            x = layer.forward(x, train)
        return x

    def named_params(self) -> dict:
        out = {}
        for lname, layer in self.layers:
            for pname, p in layer.params().items():
                out[f"{lname}.{pname}"] = p
        return out

    def param_count(self) -> int:
        return sum(p.value.size for p in self.named_params().values())

    def collect_grads(self, store) -> dict:
        grads = {}
        for lname, layer in self.layers:
            for pname in layer.params():
                g = store.grad(layer._v[pname])
                grads[f"{lname}.{pname}"] = g
        return grads

    def state_items(self):
        items = [(name, p.value) for name, p in self.named_params().items()]
        for lname, layer in self.layers:
            for bname, tensor in layer.buffers().items():
                items.append((f"{lname}.buffer.{bname}", tensor))
        return items

    def load_state_items(self, items):
        table = dict(items)
        for name, p in self.named_params().items():
            p.value = table[name]
        for lname, layer in self.layers:
            bufs = {}
            for bname in layer.buffers():
                bufs[bname] = table[f"{lname}.buffer.{bname}"]
            if bufs:
                layer.load_buffers(bufs)

    def save(self, path):
        save_checkpoint(path, self.state_items())

    def load(self, path):
        self.load_state_items(load_checkpoint(path))


def _flat_dim(h, w, widths):
    h1 = (h - 2) // 2 // 1
    return h1


def conv_stack_output(h, w, k=3, pool=2):
    """Spatial dims after conv(k) -> pool -> conv(k) -> pool (stride 1, no pad)."""
    h = (h - k + 1) // pool
    w = (w - k + 1) // pool
    h = (h - k + 1) // pool
    w = (w - k + 1) // pool
    return h, w


def build_model(arch: str, input_hw, n_classes: int, rng: Rng,
                activation: str = "crelu", widths=(16, 32, 128),
                bn_gamma: str = "matrix", alpha: float = 1.0,
                init: str = "rayleigh_phase") -> Model:
    """Two conv blocks (conv -> act -> BN -> pool) then two dense layers.

    Complex nets end in |.| + log-softmax; real baselines use the same
    topology with real ops and a plain log-softmax.
    """
    h, w = input_hw
    c1, c2, dense = widths
    ho, wo = conv_stack_output(h, w)
    if ho < 1 or wo < 1:
        raise ValueError(f"input {input_hw} too small for the conv stack")
    flat = c2 * ho * wo

    if arch in ("image_cvcnn", "audio_cvcnn"):
        layers = [
            ("conv1", ComplexConv2d(1, c1, rng=rng.split(1), init=init)),
            ("act1", Activation(activation, c1, alpha)),
            ("bn1", ComplexBatchNorm(c1, gamma_mode=bn_gamma)),
            ("pool1", MagMaxPool2d()),
            ("conv2", ComplexConv2d(c1, c2, rng=rng.split(2), init=init)),
            ("act2", Activation(activation, c2, alpha)),
            ("bn2", ComplexBatchNorm(c2, gamma_mode=bn_gamma)),
            ("pool2", MagMaxPool2d()),
            ("flatten", Flatten()),
            ("fc1", ComplexLinear(flat, dense, rng=rng.split(3), init=init)),
            ("act3", Activation(activation, dense, alpha)),
            ("fc2", ComplexLinear(dense, n_classes, rng=rng.split(4), init=init)),
            ("head", AbsLogSoftmax()),
        ]
        return Model(layers)
    if arch in ("image_realcnn", "audio_realcnn"):
        layers = [
            ("conv1", RealConv2d(1, c1, rng=rng.split(1))),
            ("act1", RealRelu()),
            ("bn1", RealBatchNorm(c1)),
            ("pool1", RealMaxPool2d()),
            ("conv2", RealConv2d(c1, c2, rng=rng.split(2))),
            ("act2", RealRelu()),
            ("bn2", RealBatchNorm(c2)),
            ("pool2", RealMaxPool2d()),
            ("flatten", Flatten()),
            ("fc1", RealLinear(flat, dense, rng=rng.split(3))),
            ("act3", RealRelu()),
            ("fc2", RealLinear(dense, n_classes, rng=rng.split(4))),
            ("head", RealLogSoftmax()),
        ]
        return Model(layers)
    raise ValueError(f"unknown arch '{arch}'")
