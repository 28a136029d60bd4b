"""Truncated Taylor-series arithmetic for exact curve derivatives.

A :class:`Taylor` holds normalized coefficients ``c[k] = f^(k)(t0) / k!`` in an
array of shape ``(order + 1, *value_shape)``.  Arithmetic broadcasts over the
value shape exactly like numpy, so the same map written with ``+ - * /``,
``.sum(axis=-1)`` and ``[..., None]`` evaluates points when given arrays and
derivative jets when given Taylor objects.
"""

from math import factorial

import numpy as np


class Taylor:
    __slots__ = ("c",)
    __array_ufunc__ = None  # make ndarray defer to our reflected operators

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, t, order):
        t = np.asarray(t, dtype=float)
        c = np.zeros((order + 1,) + t.shape)
        c[0] = t
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @property
    def order(self):
        return self.c.shape[0] - 1

    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def value(self):
        return self.c[0]

    def derivatives(self):
        """Array of derivatives ``f^(k)``, stacked on the leading axis."""
        fact = np.array([factorial(k) for k in range(self.order + 1)], dtype=float)
        return self.c * fact.reshape((-1,) + (1,) * (self.c.ndim - 1))

    # -- helpers ---------------------------------------------------------
    def _coerce(self, other):
        """Coefficient array of ``other`` as a Taylor object of the same order."""
        if isinstance(other, Taylor):
            if other.order != self.order:
                raise ValueError("Taylor order mismatch")
            return other.c
        other = np.asarray(other, dtype=float)
        c = np.zeros((self.order + 1,) + other.shape)
        c[0] = other
        return c

    def _pair(self, other):
        return _align(self.c, self._coerce(other))

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Taylor(self.c[(slice(None),) + idx])

    def sum(self, axis=-1):
        if axis >= 0:
            raise ValueError("use a negative axis (value axes are trailing)")
        return Taylor(self.c.sum(axis=axis))

    # -- arithmetic ------------------------------------------------------
    def __neg__(self):
        return Taylor(-self.c)

    def __add__(self, other):
        a, b = self._pair(other)
        return Taylor(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._pair(other)
        return Taylor(a - b)

    def __rsub__(self, other):
        a, b = self._pair(other)
        return Taylor(b - a)

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            a, b = _align(self.c, np.asarray(other, dtype=float)[None])
            return Taylor(a * b)
        return Taylor(_convolve(*self._pair(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Taylor):
            a, b = _align(self.c, np.asarray(other, dtype=float)[None])
            return Taylor(a / b)
        return Taylor(_divide(*self._pair(other)))

    def __rtruediv__(self, other):
        a, b = self._pair(other)
        return Taylor(_divide(b, a))

    def __pow__(self, p):
        if not isinstance(p, int) or p < 0:
            raise ValueError("only non-negative integer powers are supported")
        one = np.zeros_like(self.c)
        one[0] = 1.0
        out = Taylor(one)
        for _ in range(p):
            out = out * self
        return out

    def __repr__(self):
        return f"Taylor(order={self.order}, shape={self.shape})"


def _align(a, b):
    """Pad the value axes (after the leading order axis) to a common rank."""
    nd = max(a.ndim, b.ndim)
    pad = lambda c: c.reshape(c.shape[:1] + (1,) * (nd - c.ndim) + c.shape[1:])  # noqa: E731
    return pad(a), pad(b)


def _convolve(a, b):
    K = a.shape[0]
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros((K,) + shape)
    for k in range(K):
        for j in range(k + 1):
            out[k] = out[k] + a[j] * b[k - j]
    return out


def _divide(a, b):
    K = a.shape[0]
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros((K,) + shape)
    for k in range(K):
        acc = a[k] + np.zeros(shape)
        for j in range(1, k + 1):
            acc = acc - b[j] * out[k - j]
        out[k] = acc / b[0]
    return out


def exp(x):
    if not isinstance(x, Taylor):
        return np.exp(x)
    a = x.c
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for k in range(1, a.shape[0]):
        e[k] = sum(j * a[j] * e[k - j] for j in range(1, k + 1)) / k
    return Taylor(e)


def _sincos(x):
    a = x.c
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    for k in range(1, a.shape[0]):
        s[k] = sum(j * a[j] * c[k - j] for j in range(1, k + 1)) / k
        c[k] = -sum(j * a[j] * s[k - j] for j in range(1, k + 1)) / k
    return Taylor(s), Taylor(c)


def sin(x):
    return _sincos(x)[0] if isinstance(x, Taylor) else np.sin(x)


def cos(x):
    return _sincos(x)[1] if isinstance(x, Taylor) else np.cos(x)


def value(x):
    """Plain value of a number, array or Taylor object."""
    return x.value if isinstance(x, Taylor) else np.asarray(x)


def stack_last(parts):
    """Stack scalars/vectors (Taylor or plain) along a new trailing axis."""
    if not any(isinstance(p, Taylor) for p in parts):
        return np.stack([np.asarray(p) for p in parts], axis=-1)
    order = next(p.order for p in parts if isinstance(p, Taylor))
    cs = [p.c if isinstance(p, Taylor) else Taylor.variable(0.0, order)._coerce(p) for p in parts]
    shape = np.broadcast_shapes(*(c.shape for c in cs))
    return Taylor(np.stack([np.broadcast_to(c, shape) for c in cs], axis=-1))


def concat_last(parts):
    """Concatenate vectors (Taylor or plain) along their trailing axis."""
    if not any(isinstance(p, Taylor) for p in parts):
        return np.concatenate([np.asarray(p) for p in parts], axis=-1)
    order = next(p.order for p in parts if isinstance(p, Taylor))
    cs = [p.c if isinstance(p, Taylor) else Taylor.variable(0.0, order)._coerce(p) for p in parts]
    lead = np.broadcast_shapes(*(c.shape[:-1] for c in cs))
    return Taylor(np.concatenate([np.broadcast_to(c, lead + c.shape[-1:]) for c in cs], axis=-1))


def matvec(M, v):
    """M @ v on the trailing axis for a constant matrix M."""
    M = np.asarray(M, dtype=float)
    if isinstance(v, Taylor):
        return Taylor(np.einsum("ij,...j->...i", M, v.c))
    return np.einsum("ij,...j->...i", M, v)
