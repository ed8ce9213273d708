"""Reverse-mode automatic differentiation over real numpy tensors.

Closure-per-node tape in the micrograd style, generalized to ndarrays with
broadcasting, batched matmul, segment-sum bilinear contractions, and a
complex layer (CTensor) that stores real/imaginary parts as two real nodes
so every gradient stays real.  Graph construction is eager; a node only
carries a backward closure when one of its parents requires gradients, so
constant subgraphs cost nothing in the backward pass.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast to produce `grad`."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A real ndarray node in the computation graph."""

    __slots__ = ("data", "grad", "_backward", "_prev", "needs")

    def __init__(self, data, prev=(), needs=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._backward = None
        self._prev = prev
        self.needs = needs

    # -- construction -------------------------------------------------

    @staticmethod
    def leaf(data) -> "Tensor":
        return Tensor(data, needs=True)

    @staticmethod
    def const(data) -> "Tensor":
        return Tensor(data)

    @property
    def shape(self):
        return self.data.shape

    def _acc(self, g):
        self.grad = g if self.grad is None else self.grad + g

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data + other.data)
            if self.needs or other.needs:
                out.needs, out._prev = True, (self, other)

                def bw(g, a=self, b=other):
                    if a.needs:
                        a._acc(_unbroadcast(g, a.shape))
                    if b.needs:
                        b._acc(_unbroadcast(g, b.shape))

                out._backward = bw
            return out
        out = Tensor(self.data + other)
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self: a._acc(_unbroadcast(g, a.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data)
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self: a._acc(-g)
        return out

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data * other.data)
            if self.needs or other.needs:
                out.needs, out._prev = True, (self, other)

                def bw(g, a=self, b=other):
                    if a.needs:
                        a._acc(_unbroadcast(g * b.data, a.shape))
                    if b.needs:
                        b._acc(_unbroadcast(g * a.data, b.shape))

                out._backward = bw
            return out
        c = other
        out = Tensor(self.data * c)
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self, c=c: a._acc(_unbroadcast(g * c, a.shape))
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data / other.data)
            if self.needs or other.needs:
                out.needs, out._prev = True, (self, other)

                def bw(g, a=self, b=other):
                    if a.needs:
                        a._acc(_unbroadcast(g / b.data, a.shape))
                    if b.needs:
                        b._acc(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

                out._backward = bw
            return out
        return self * (1.0 / other)

    def __pow__(self, n):
        out = Tensor(self.data**n)
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self, n=n: a._acc(
                g * n * a.data ** (n - 1)
            )
        return out

    def __matmul__(self, other):
        assert isinstance(other, Tensor)
        assert self.data.ndim >= 2 and other.data.ndim >= 2
        out = Tensor(self.data @ other.data)
        if self.needs or other.needs:
            out.needs, out._prev = True, (self, other)

            def bw(g, a=self, b=other):
                if a.needs:
                    a._acc(_unbroadcast(g @ b.data.swapaxes(-1, -2), a.shape))
                if b.needs:
                    b._acc(_unbroadcast(a.data.swapaxes(-1, -2) @ g, b.shape))

            out._backward = bw
        return out

    # -- elementwise nonlinearities ------------------------------------

    def _unary(self, value, dfn):
        out = Tensor(value)
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self, o=out: a._acc(g * dfn(a.data, o.data))
        return out

    def tanh(self):
        return self._unary(np.tanh(self.data), lambda x, y: 1.0 - y * y)

    def sigmoid(self):
        y = 1.0 / (1.0 + np.exp(-self.data))
        return self._unary(y, lambda x, y: y * (1.0 - y))

    def exp(self):
        return self._unary(np.exp(self.data), lambda x, y: y)

    def sin(self):
        return self._unary(np.sin(self.data), lambda x, y: np.cos(x))

    def cos(self):
        return self._unary(np.cos(self.data), lambda x, y: -np.sin(x))

    def sqrt(self):
        return self._unary(np.sqrt(self.data), lambda x, y: 0.5 / y)

    def silu(self):
        """x * sigmoid(x), the hidden-layer activation."""
        return self * self.sigmoid()

    # -- shape and reductions ------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims))
        if self.needs:
            out.needs, out._prev = True, (self,)

            def bw(g, a=self, axis=axis, keepdims=keepdims):
                if axis is not None and not keepdims:
                    g = np.expand_dims(g, axis)
                a._acc(np.broadcast_to(g, a.shape))

            out._backward = bw
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def cumsum(self, axis):
        out = Tensor(self.data.cumsum(axis=axis))
        if self.needs:
            out.needs, out._prev = True, (self,)

            def bw(g, a=self, axis=axis):
                rev = np.flip(g, axis=axis)
                a._acc(np.flip(rev.cumsum(axis=axis), axis=axis))

            out._backward = bw
        return out

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out = Tensor(self.data.reshape(shape))
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self: a._acc(g.reshape(a.shape))
        return out

    def swapaxes(self, i, j):
        out = Tensor(self.data.swapaxes(i, j))
        if self.needs:
            out.needs, out._prev = True, (self,)
            out._backward = lambda g, a=self, i=i, j=j: a._acc(g.swapaxes(i, j))
        return out

    def __getitem__(self, idx):
        out = Tensor(self.data[idx])
        if self.needs:
            out.needs, out._prev = True, (self,)

            def bw(g, a=self, idx=idx):
                z = np.zeros(a.shape)
                np.add.at(z, idx, g)
                a._acc(z)

            out._backward = bw
        return out

    def item(self) -> float:
        return float(self.data.reshape(()))


def backward(out: Tensor):
    """Populate .grad on every gradient-requiring ancestor of a scalar output."""
    if out.data.size != 1:
        raise ValueError("backward requires a scalar output")
    if not out.needs:
        return
    topo, visited, stack = [], set(), [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._prev:
            if p.needs and id(p) not in visited:
                stack.append((p, False))
    out.grad = np.ones_like(out.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


class BilinearScatter:
    """Sparse bilinear contraction out[.., k] = sum_p w_p x[.., i_p] y[.., j_p].

    Pair lists are pre-sorted per output index so forward and both backward
    contractions are segment sums (add.reduceat), with a fixed deterministic
    reduction order.  Used for basis-projected commutators in the loss.
    """

    def __init__(self, ii, jj, kk, w, in_size, out_size, row_block=None):
        order = np.argsort(kk, kind="stable")
        self.ii = np.ascontiguousarray(ii[order])
        self.jj = np.ascontiguousarray(jj[order])
        self.kk = np.ascontiguousarray(kk[order])
        self.w = np.ascontiguousarray(np.asarray(w, dtype=np.float64)[order])
        self.in_size = in_size
        self.out_size = out_size
        self.k_cols, self.k_starts = np.unique(self.kk, return_index=True)
        self.order_i = np.argsort(self.ii, kind="stable")
        self.i_cols, self.i_starts = np.unique(self.ii[self.order_i], return_index=True)
        self.order_j = np.argsort(self.jj, kind="stable")
        self.j_cols, self.j_starts = np.unique(self.jj[self.order_j], return_index=True)
        self.n_pairs = len(self.w)
        if row_block is None:
            row_block = max(1, (1 << 24) // max(1, self.n_pairs))
        self.row_block = row_block

    def _segment_apply(self, rows_fn, starts, cols, n_rows, width):
        out = np.zeros((n_rows, width))
        for lo in range(0, n_rows, self.row_block):
            hi = min(lo + self.row_block, n_rows)
            vals = rows_fn(lo, hi)
            out[lo:hi, cols] = np.add.reduceat(vals, starts, axis=1)
        return out

    def apply(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if self.n_pairs == 0:
            return np.zeros((x.shape[0], self.out_size))
        return self._segment_apply(
            lambda lo, hi: self.w * x[lo:hi, self.ii] * y[lo:hi, self.jj],
            self.k_starts,
            self.k_cols,
            x.shape[0],
            self.out_size,
        )

    def grad_x(self, g, y):
        if self.n_pairs == 0:
            return np.zeros((g.shape[0], self.in_size))
        return self._segment_apply(
            lambda lo, hi: (self.w * g[lo:hi, self.kk] * y[lo:hi, self.jj])[
                :, self.order_i
            ],
            self.i_starts,
            self.i_cols,
            g.shape[0],
            self.in_size,
        )

    def grad_y(self, g, x):
        if self.n_pairs == 0:
            return np.zeros((g.shape[0], self.in_size))
        return self._segment_apply(
            lambda lo, hi: (self.w * g[lo:hi, self.kk] * x[lo:hi, self.ii])[
                :, self.order_j
            ],
            self.j_starts,
            self.j_cols,
            g.shape[0],
            self.in_size,
        )

    def __call__(self, x: Tensor, y: Tensor) -> Tensor:
        out = Tensor(self.apply(x.data, y.data))
        if x.needs or y.needs:
            out.needs, out._prev = True, (x, y)

            def bw(g, a=x, b=y, table=self):
                if a.needs:
                    a._acc(table.grad_x(g, b.data))
                if b.needs:
                    b._acc(table.grad_y(g, a.data))

            out._backward = bw
        return out


class CTensor:
    """Complex tensor as a (real, imaginary) pair of Tensor nodes.

    Mirrors the ndarray surface used by the propagation code (conj,
    swapaxes, reshape, cumsum, sum, matmul, indexing) so the same Magnus
    routines run on numpy complex arrays and on the tape.
    """

    __slots__ = ("re", "im")

    def __init__(self, re: Tensor, im: Tensor):
        self.re = re
        self.im = im

    @staticmethod
    def const(z) -> "CTensor":
        z = np.asarray(z, dtype=np.complex128)
        return CTensor(Tensor.const(z.real.copy()), Tensor.const(z.imag.copy()))

    @staticmethod
    def from_real(re: Tensor) -> "CTensor":
        return CTensor(re, Tensor.const(np.zeros(re.shape)))

    @property
    def shape(self):
        return self.re.shape

    def value(self) -> np.ndarray:
        return self.re.data + 1j * self.im.data

    def __add__(self, other):
        if isinstance(other, CTensor):
            return CTensor(self.re + other.re, self.im + other.im)
        other = complex(other)
        return CTensor(self.re + other.real, self.im + other.imag)

    __radd__ = __add__

    def __neg__(self):
        return CTensor(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, CTensor):
            return CTensor(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        if isinstance(other, Tensor):  # real factor
            return CTensor(self.re * other, self.im * other)
        c = complex(other)
        if c.imag == 0.0:
            return CTensor(self.re * c.real, self.im * c.real)
        if c.real == 0.0:
            return CTensor(self.im * (-c.imag), self.re * c.imag)
        return CTensor(
            self.re * c.real - self.im * c.imag,
            self.re * c.imag + self.im * c.real,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return CTensor(self.re / other, self.im / other)
        c = complex(other)
        return self * (1.0 / c)

    def __matmul__(self, other):
        assert isinstance(other, CTensor)
        return CTensor(
            self.re @ other.re - self.im @ other.im,
            self.re @ other.im + self.im @ other.re,
        )

    def conj(self):
        return CTensor(self.re, -self.im)

    def swapaxes(self, i, j):
        return CTensor(self.re.swapaxes(i, j), self.im.swapaxes(i, j))

    def reshape(self, *shape):
        return CTensor(self.re.reshape(*shape), self.im.reshape(*shape))

    def cumsum(self, axis):
        return CTensor(self.re.cumsum(axis), self.im.cumsum(axis))

    def sum(self, axis=None, keepdims=False):
        return CTensor(
            self.re.sum(axis=axis, keepdims=keepdims),
            self.im.sum(axis=axis, keepdims=keepdims),
        )

    def __getitem__(self, idx):
        return CTensor(self.re[idx], self.im[idx])

    def abs2(self) -> Tensor:
        return self.re * self.re + self.im * self.im


def vdot(a: CTensor, b: CTensor) -> CTensor:
    """<a|b> = sum(conj(a) * b) over all elements."""
    p = a.conj() * b
    return CTensor(p.re.sum(), p.im.sum())
