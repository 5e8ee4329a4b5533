"""Reverse-mode autodiff over complex tensors.

Every operation is lowered to real arithmetic on the (real, imag) planes and
differentiated by ordinary real reverse-mode. The gradient reported for a
leaf z = x + iy is g = dL/dx + i*dL/dy with L the real scalar loss. In
Wirtinger terms g equals 2*dL/dz-bar; the factor of two is a convention
choice absorbed by the learning rate.
"""

from __future__ import annotations

import numpy as np

from .tensor import ComplexTensor

class _Node:
    __slots__ = ("parents", "backward")

    def __init__(self, parents, backward):
        self.parents = parents
        self.backward = backward


class Var:
    """Recorded value on a tape. The value is immutable once recorded."""

    __slots__ = ("tape", "node_id", "value", "requires_grad")

    def __init__(self, tape, node_id, value, requires_grad):
        self.tape = tape
        self.node_id = node_id
        self.value = value
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(id={self.node_id}, shape={self.value.shape})"


class Tape:
    """Append-only record of forward operations; one backward pass each."""

    def __init__(self):
        self.nodes = []
        self._consumed = False

    def leaf(self, value: ComplexTensor, requires_grad: bool = False) -> Var:
        if not isinstance(value, ComplexTensor):
            value = ComplexTensor.from_complex(np.asarray(value))
        node_id = len(self.nodes)
        self.nodes.append(_Node((), None))
        return Var(self, node_id, value, requires_grad)

    def record(self, inputs, value: ComplexTensor, backward) -> Var:
        """Append an op node.

        `backward(gx, gy)` must return one (gx_contrib, gy_contrib) pair per
        input, where each contribution may be None to mean zero.
        """
        for v in inputs:
            if v.tape is not self:
                raise ValueError("cannot mix Vars from different tapes")
        node_id = len(self.nodes)
        self.nodes.append(_Node(tuple(v.node_id for v in inputs), backward))
        return Var(self, node_id, value, requires_grad=False)


class GradStore:
    """Per-leaf gradients g = dL/dx + i*dL/dy keyed by tape node id."""

    def __init__(self, grads):
        self._grads = grads

    def grad(self, var: Var) -> ComplexTensor | None:
        pair = self._grads.get(var.node_id)
        if pair is None:
            return None
        return ComplexTensor(pair[0], pair[1])

    def __contains__(self, var):
        return var.node_id in self._grads


def backward(loss: Var) -> GradStore:
    """Run reverse-mode from a real scalar loss and collect leaf gradients."""
    tape = loss.tape
    if tape._consumed:
        raise RuntimeError("tape already consumed by a previous backward pass")
    if loss.value.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")
    if np.max(np.abs(loss.value.imag)) > 1e-12:
        raise ValueError("loss must be real (imag plane exceeds 1e-12)")
    tape._consumed = True

    adj = {loss.node_id: (np.ones_like(loss.value.real),
                          np.zeros_like(loss.value.imag))}
    leaf_grads = {}
    for node_id in range(loss.node_id, -1, -1):
        pair = adj.pop(node_id, None)
        if pair is None:
            continue
        node = tape.nodes[node_id]
        if node.backward is None:
            leaf_grads[node_id] = pair
            continue
        contribs = node.backward(pair[0], pair[1])
        for pid, contrib in zip(node.parents, contribs):
            if contrib is None:
                continue
            cx, cy = contrib
            prev = adj.get(pid)
            if prev is None:
                adj[pid] = (np.array(cx, dtype=np.float64, copy=True),
                            np.array(cy, dtype=np.float64, copy=True))
            else:
                prev[0] += cx
                prev[1] += cy
    tape.nodes = []  # free recorded closures
    return GradStore(leaf_grads)


# ---------------------------------------------------------------------------
# Basic recorded arithmetic. Heavier network ops live in cvnn.layers and
# cvnn.activations and record through the same tape interface.

def add(a: Var, b: Var) -> Var:
    out = ComplexTensor(a.value.real + b.value.real,
                        a.value.imag + b.value.imag)

    def bwd(gx, gy):
        return [(gx, gy), (gx, gy)]

    return a.tape.record([a, b], out, bwd)


def sub(a: Var, b: Var) -> Var:
    out = ComplexTensor(a.value.real - b.value.real,
                        a.value.imag - b.value.imag)

    def bwd(gx, gy):
        return [(gx, gy), (-gx, -gy)]

    return a.tape.record([a, b], out, bwd)


def mul(a: Var, b: Var) -> Var:
    """Elementwise complex product."""
    ax, ay = a.value.real, a.value.imag
    bx, by = b.value.real, b.value.imag
    out = ComplexTensor(ax * bx - ay * by, ax * by + ay * bx)

    def bwd(gx, gy):
        return [
            (gx * bx + gy * by, -gx * by + gy * bx),
            (gx * ax + gy * ay, -gx * ay + gy * ax),
        ]

    return a.tape.record([a, b], out, bwd)


def scale(a: Var, c) -> Var:
    """Multiply by a python scalar constant (real or complex)."""
    c = complex(c)
    ax, ay = a.value.real, a.value.imag
    out = ComplexTensor(c.real * ax - c.imag * ay, c.real * ay + c.imag * ax)

    def bwd(gx, gy):
        return [(c.real * gx + c.imag * gy, -c.imag * gx + c.real * gy)]

    return a.tape.record([a], out, bwd)


def conj(a: Var) -> Var:
    out = ComplexTensor(a.value.real.copy(), -a.value.imag)

    def bwd(gx, gy):
        return [(gx, -gy)]

    return a.tape.record([a], out, bwd)


def take_real(a: Var) -> Var:
    out = ComplexTensor(a.value.real.copy(), np.zeros_like(a.value.imag))

    def bwd(gx, gy):
        return [(gx, np.zeros_like(gx))]

    return a.tape.record([a], out, bwd)


def take_imag(a: Var) -> Var:
    out = ComplexTensor(a.value.imag.copy(), np.zeros_like(a.value.real))

    def bwd(gx, gy):
        return [(np.zeros_like(gx), gx)]

    return a.tape.record([a], out, bwd)


def abs2(a: Var) -> Var:
    """Elementwise |z|^2 as a real-plane value."""
    ax, ay = a.value.real, a.value.imag
    out = ComplexTensor(ax * ax + ay * ay, np.zeros_like(ax))

    def bwd(gx, gy):
        return [(2.0 * ax * gx, 2.0 * ay * gx)]

    return a.tape.record([a], out, bwd)


def total(a: Var) -> Var:
    """Sum of all elements, as a shape-(1,) value."""
    out = ComplexTensor(np.array([a.value.real.sum()]),
                        np.array([a.value.imag.sum()]))
    shape = a.value.shape

    def bwd(gx, gy):
        return [(np.full(shape, gx[0]), np.full(shape, gy[0]))]

    return a.tape.record([a], out, bwd)


def mean_all(a: Var) -> Var:
    n = a.value.size
    return scale(total(a), 1.0 / n)


# ---------------------------------------------------------------------------
# Numerical gradient checking.

def _loss_value(f, x0: ComplexTensor) -> float:
    tape = Tape()
    v = tape.leaf(x0, requires_grad=False)
    out = f(v)
    val = float(out.value.real.reshape(-1)[0])
    return val


def grad_check(f, x0: ComplexTensor, eps: float = 1e-5) -> float:
    """Compare analytic gradients of a scalar f against central differences.

    Perturbs every real and imaginary coordinate of x0 by +-eps and returns
    the max relative error across coordinates. f must build its computation
    from the Var it receives (ops record on var.tape).
    """
    if not 1e-8 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-8, 1e-3], got {eps}")

    tape = Tape()
    v = tape.leaf(x0, requires_grad=True)
    out = f(v)
    store = backward(out)
    g = store.grad(v)
    if g is None:
        raise ValueError("f does not depend on its input")

    worst = 0.0
    for plane in ("real", "imag"):
        analytic = getattr(g, plane)
        base = getattr(x0, plane)
        for idx in range(base.size):
            xp = x0.copy()
            getattr(xp, plane).reshape(-1)[idx] += eps
            fp = _loss_value(f, xp)
            xm = x0.copy()
            getattr(xm, plane).reshape(-1)[idx] -= eps
            fm = _loss_value(f, xm)
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise ValueError(
                    f"f non-finite at probe point ({plane} coordinate {idx})"
                )
            numeric = (fp - fm) / (2.0 * eps)
            ana = analytic.reshape(-1)[idx]
            denom = max(abs(ana), abs(numeric), 1e-6)
            err = abs(ana - numeric) / denom
            if err > worst:
                worst = err
    return worst
