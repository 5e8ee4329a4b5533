"""Optimizers over complex parameters.

Updates act independently on the real and imaginary planes, consistent with
the g = dL/dx + i*dL/dy gradient convention. Adam keeps per-plane moments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ComplexTensor


@dataclass
class OptimState:
    kind: str = "adam"              # sgd | adam
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    step: int = 0
    m: dict = field(default_factory=dict)   # name -> (mx, my)
    v: dict = field(default_factory=dict)   # name -> (vx, vy)


def clip_grad_norm(grads: dict, max_norm: float) -> dict:
    """Scale all gradients so the global L2 norm over both planes is <= max_norm."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    sq = 0.0
    for g in grads.values():
        sq += float((g.real * g.real).sum() + (g.imag * g.imag).sum())
    norm = np.sqrt(sq)
    if norm <= max_norm:
        return grads
    factor = max_norm / norm
    return {name: ComplexTensor(g.real * factor, g.imag * factor)
            for name, g in grads.items()}


def sgd_step(params: dict, grads: dict, st: OptimState) -> None:
    """p <- p - lr*g on each plane. params maps name -> Param holder."""
    st.step += 1
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            raise KeyError(f"missing gradient for parameter '{name}'")
        p = param.value
        param.value = ComplexTensor(p.real - st.lr * g.real,
                                    p.imag - st.lr * g.imag)


def adam_step(params: dict, grads: dict, st: OptimState) -> None:
    """Bias-corrected Adam treating each complex parameter as two real ones."""
    st.step += 1
    b1, b2 = st.beta1, st.beta2
    c1 = 1.0 - b1 ** st.step
    c2 = 1.0 - b2 ** st.step
    for name, param in params.items():
        g = grads.get(name)
        if g is None:
            raise KeyError(f"missing gradient for parameter '{name}'")
        if name not in st.m:
            shape = param.value.shape
            st.m[name] = (np.zeros(shape), np.zeros(shape))
            st.v[name] = (np.zeros(shape), np.zeros(shape))
        mx, my = st.m[name]
        vx, vy = st.v[name]
        mx = b1 * mx + (1 - b1) * g.real
        my = b1 * my + (1 - b1) * g.imag
        vx = b2 * vx + (1 - b2) * g.real ** 2
        vy = b2 * vy + (1 - b2) * g.imag ** 2
        st.m[name] = (mx, my)
        st.v[name] = (vx, vy)
        p = param.value
        param.value = ComplexTensor(
            p.real - st.lr * (mx / c1) / (np.sqrt(vx / c2) + st.eps),
            p.imag - st.lr * (my / c1) / (np.sqrt(vy / c2) + st.eps),
        )


def optimizer_step(params: dict, grads: dict, st: OptimState) -> None:
    """Clip (when configured) then apply the configured update rule."""
    if st.clip_norm is not None:
        grads = clip_grad_norm(grads, st.clip_norm)
    if st.kind == "sgd":
        sgd_step(params, grads, st)
    elif st.kind == "adam":
        adam_step(params, grads, st)
    else:
        raise ValueError(f"unknown optimizer kind '{st.kind}'")


def optim_state_items(st: OptimState):
    """Serialize moments and step as named tensors (checkpoint records)."""
    items = [("optim.step", ComplexTensor(np.array([float(st.step)]), np.zeros(1)))]
    for name in sorted(st.m):
        items.append((f"optim.m.{name}", ComplexTensor(*st.m[name])))
        items.append((f"optim.v.{name}", ComplexTensor(*st.v[name])))
    return items


def load_optim_state_items(st: OptimState, items: dict) -> None:
    st.step = int(items["optim.step"].real[0])
    st.m = {}
    st.v = {}
    for name, tensor in items.items():
        if name.startswith("optim.m."):
            st.m[name[len("optim.m."):]] = (tensor.real.copy(), tensor.imag.copy())
        elif name.startswith("optim.v."):
            st.v[name[len("optim.v."):]] = (tensor.real.copy(), tensor.imag.copy())
