"""Dense numpy-backed tensors with reverse-mode automatic differentiation.

The graph is built eagerly: every operation touching a gradient-tracked
tensor records a closure that pushes gradients to its inputs, and
``backward()`` replays the closures in reverse topological order.
Training runs in float32; the gradient-check suite drives the same code
paths at float64.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (eval-mode forwards)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to ``shape`` (reverses numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


class Tensor:
    """A dense real array plus the bookkeeping needed for backprop.

    ``grad`` is lazily allocated and has the exact shape of ``data``.
    Detached tensors (``requires_grad=False``) never receive gradients.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # ---- basic introspection -------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # ---- autodiff machinery --------------------------------------------

    def accumulate_grad(self, g: np.ndarray):
        if not self.requires_grad:
            return
        if g.shape != self.data.shape:
            raise ValueError(f"gradient shape {g.shape} does not match tensor shape {self.data.shape}")
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad=None):
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without an explicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=self.data.dtype)
            if grad.shape != self.data.shape:
                raise ValueError("seed gradient shape mismatch")

        # Iterative topological sort; graphs from recurrent nets exceed
        # Python's default recursion limit.
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- elementwise arithmetic (broadcasting) --------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        out = make_op(np.add(self.data, other.data), (self, other))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(unbroadcast(g, self.data.shape))
                other.accumulate_grad(unbroadcast(g, other.data.shape))
            out._backward = backward
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        out = make_op(np.subtract(self.data, other.data), (self, other))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(unbroadcast(g, self.data.shape))
                other.accumulate_grad(unbroadcast(-g, other.data.shape))
            out._backward = backward
        return out

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        out = make_op(np.multiply(self.data, other.data), (self, other))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(unbroadcast(g * other.data, self.data.shape))
                other.accumulate_grad(unbroadcast(g * self.data, other.data.shape))
            out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        out = make_op(np.divide(self.data, other.data), (self, other))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(unbroadcast(g / other.data, self.data.shape))
                other.accumulate_grad(unbroadcast(-g * self.data / (other.data * other.data), other.data.shape))
            out._backward = backward
        return out

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __neg__(self):
        out = make_op(-self.data, (self,))
        if out.requires_grad:
            out._backward = lambda g: self.accumulate_grad(-g)
        return out

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")
        out = make_op(self.data ** p, (self,))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(g * p * self.data ** (p - 1))
            out._backward = backward
        return out

    def __matmul__(self, other):
        other = self._coerce(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError("matmul is implemented for 2-D tensors only")
        out = make_op(self.data @ other.data, (self, other))
        if out.requires_grad:
            def backward(g):
                self.accumulate_grad(g @ other.data.T)
                other.accumulate_grad(self.data.T @ g)
            out._backward = backward
        return out

    # ---- reductions and shape ops ---------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = make_op(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        if out.requires_grad:
            shape = self.data.shape

            def backward(g):
                if axis is None:
                    self.accumulate_grad(np.broadcast_to(g, shape).copy() if keepdims
                                         else np.full(shape, g, dtype=self.data.dtype))
                else:
                    gg = g if keepdims else np.expand_dims(g, axis)
                    self.accumulate_grad(np.broadcast_to(gg, shape).astype(self.data.dtype, copy=True))
            out._backward = backward
        return out

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            count = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            count = int(np.prod([self.data.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = make_op(self.data.reshape(shape), (self,))
        if out.requires_grad:
            orig = self.data.shape
            out._backward = lambda g: self.accumulate_grad(g.reshape(orig))
        return out

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or None
        out = make_op(np.transpose(self.data, axes), (self,))
        if out.requires_grad:
            inv = None if axes is None else tuple(np.argsort(axes))
            out._backward = lambda g: self.accumulate_grad(np.transpose(g, inv))
        return out

    # ---- elementwise nonlinearities --------------------------------------

    def exp(self):
        out = make_op(np.exp(self.data), (self,))
        if out.requires_grad:
            val = out.data
            out._backward = lambda g: self.accumulate_grad(g * val)
        return out

    def log(self):
        out = make_op(np.log(self.data), (self,))
        if out.requires_grad:
            out._backward = lambda g: self.accumulate_grad(g / self.data)
        return out

    def sqrt(self):
        out = make_op(np.sqrt(self.data), (self,))
        if out.requires_grad:
            val = out.data
            out._backward = lambda g: self.accumulate_grad(g / (2.0 * val))
        return out

    def tanh(self):
        out = make_op(np.tanh(self.data), (self,))
        if out.requires_grad:
            val = out.data
            out._backward = lambda g: self.accumulate_grad(g * (1.0 - val * val))
        return out


def make_op(data: np.ndarray, parents: tuple) -> Tensor:
    """Wrap an op result; the caller attaches ``_backward`` when tracked."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
    return out
