"""Reverse-mode autodiff on numpy float64 arrays.

A `Tape` records operations while it is active (used as a context manager);
`Tape.backward(loss)` then walks the records in reverse and accumulates
gradients into every participating leaf tensor. One tape per rollout; the
tape is dropped after backward, there is no persistent graph.

Every forward op validates that its output is finite and raises
NumericError otherwise, so NaNs fail fast at the op that produced them.
"""
from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .core import ContractError, NumericError, TWO_PI

_ACTIVE: Optional["Tape"] = None


class Tensor:
    """Array value tracked by the tape. Data is always float64."""

    __slots__ = ("data", "requires_grad", "_grad", "_on_tape")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._on_tape = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def grad(self) -> np.ndarray:
        """Accumulated gradient; zeros until a backward pass reaches this leaf."""
        if self._grad is None:
            return np.zeros_like(self.data)
        return self._grad

    def zero_grad(self):
        self._grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, axes=None):
        return transpose(self, axes)


class _Node:
    __slots__ = ("out", "parents", "vjp")

    def __init__(self, out, parents, vjp):
        self.out = out
        self.parents = parents
        self.vjp = vjp


class Tape:
    """Append-only record of ops; nodes appear in topological order."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        global _ACTIVE
        if _ACTIVE is not None:
            raise ContractError("a tape is already active; tapes do not nest")
        _ACTIVE = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _ACTIVE
        _ACTIVE = None
        return False

    def backward(self, loss: Tensor):
        """Backpropagate from a scalar loss recorded on this tape.

        Sets `.grad` on every leaf tensor with requires_grad that the loss
        depends on; untouched leaves keep their default zero gradient.
        """
        if not isinstance(loss, Tensor):
            raise ContractError("loss must be a Tensor")
        if loss.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        if not loss._on_tape:
            raise ContractError("loss is not recorded on a tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent._on_tape:
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
                else:
                    parent._grad = pg.copy() if parent._grad is None else parent._grad + pg

    def __len__(self):
        return len(self.nodes)


def active_tape() -> Optional[Tape]:
    return _ACTIVE


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by op '{op}'")


def _result(data, parents: Sequence[Tensor], vjp: Callable, op: str) -> Tensor:
    """Wrap op output; record on the active tape when gradients are needed."""
    data = np.asarray(data, dtype=np.float64)
    _check_finite(data, op)
    out = Tensor(data)
    if _ACTIVE is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._on_tape = True
        _ACTIVE.nodes.append(_Node(out, tuple(parents), vjp))
    return out


def custom_op(data, parents: Sequence[Tensor], vjp: Callable, name: str = "custom") -> Tensor:
    """Record a hand-written primitive: vjp(g) returns one gradient (or None)
    per parent, each matching that parent's shape."""
    return _result(data, parents, vjp, name)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to the given broadcast-source shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _result(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    with np.errstate(all="ignore"):
        quotient = a.data / b.data
    return _result(
        quotient,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
        "div",
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def _unary(a, fn, dfn, name) -> Tensor:
    a = as_tensor(a)
    with np.errstate(all="ignore"):  # finite check raises on bad outputs
        out_data = fn(a.data)
    return _result(out_data, (a,), lambda g: (g * dfn(a.data, out_data),), name)


def sin(a) -> Tensor:
    return _unary(a, np.sin, lambda x, y: np.cos(x), "sin")


def cos(a) -> Tensor:
    return _unary(a, np.cos, lambda x, y: -np.sin(x), "cos")


def tan(a) -> Tensor:
    return _unary(a, np.tan, lambda x, y: 1.0 + y * y, "tan")


def atan(a) -> Tensor:
    return _unary(a, np.arctan, lambda x, y: 1.0 / (1.0 + x * x), "atan")


def tanh(a) -> Tensor:
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y, "tanh")


def sigmoid(a) -> Tensor:
    def _sig(x):
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out

    a = as_tensor(a)
    y = _sig(np.atleast_1d(a.data)).reshape(a.shape)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def exp(a) -> Tensor:
    return _unary(a, np.exp, lambda x, y: y, "exp")


def log(a) -> Tensor:
    return _unary(a, np.log, lambda x, y: 1.0 / x, "log")


def sqrt(a) -> Tensor:
    return _unary(a, np.sqrt, lambda x, y: 0.5 / y, "sqrt")


def clamp(a, lo=None, hi=None) -> Tensor:
    """Clip to [lo, hi]; gradient is passed through where not clipped."""
    a = as_tensor(a)
    out_data = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data, dtype=bool)
    if lo is not None:
        inside &= a.data >= lo
    if hi is not None:
        inside &= a.data <= hi
    return _result(out_data, (a,), lambda g: (g * inside,), "clamp")


def relu(a) -> Tensor:
    return clamp(a, lo=0.0)


def wrap_angle(a) -> Tensor:
    """Wrap into (-pi, pi]; gradient is the identity (the wrap is a shift)."""
    a = as_tensor(a)
    out_data = np.pi - (np.pi - a.data) % TWO_PI
    return _result(out_data, (a,), lambda g: (g,), "wrap_angle")


# ---------------------------------------------------------------------------
# reductions, shape ops


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _result(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp, "sum")


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[i] for i in axes]))

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.shape).copy(),)

    return _result(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp, "mean")


def take(a, key) -> Tensor:
    """Basic/advanced indexing; backward scatter-adds into the source."""
    a = as_tensor(a)

    def vjp(g):
        z = np.zeros_like(a.data)
        np.add.at(z, key, g)
        return (z,)

    return _result(a.data[key], (a,), vjp, "take")


def put(a, key, values) -> Tensor:
    """Out-of-place assignment: result equals `a` with a[key] = values.

    The indexed positions must be unique; their incoming gradient is routed
    to `values` and masked off `a`.
    """
    a, values = as_tensor(a), as_tensor(values)
    out_data = a.data.copy()
    out_data[key] = values.data

    def vjp(g):
        ga = g.copy()
        ga[key] = 0.0
        gv = _unbroadcast(g[key], values.shape)
        return (ga, gv)

    return _result(out_data, (a, values), vjp, "put")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _result(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        if axes is None:
            return (g.transpose(),)
        inv = np.argsort(axes)
        return (g.transpose(inv),)

    return _result(a.data.transpose(axes), (a,), vjp, "transpose")


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, vjp, "concat")


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def vjp(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(tensors)))

    return _result(np.stack([t.data for t in tensors], axis=axis), tensors, vjp, "stack")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim > 2 or b.data.ndim > 2:
        raise ContractError("matmul supports 1D and 2D operands")

    def vjp(g):
        ad, bd = a.data, b.data
        if ad.ndim == 1 and bd.ndim == 1:  # dot -> scalar
            return (g * bd, g * ad)
        if ad.ndim == 2 and bd.ndim == 2:
            return (g @ bd.T, ad.T @ g)
        if ad.ndim == 1:  # (k,) @ (k,n) -> (n,)
            return (bd @ g, np.outer(ad, g))
        return (np.outer(g, bd), ad.T @ g)  # (m,k) @ (k,) -> (m,)

    return _result(a.data @ b.data, (a, b), vjp, "matmul")


# ---------------------------------------------------------------------------
# sampling, convolution, pooling


def bilinear_sample(image, coords) -> Tensor:
    """Sample image at fractional pixel coords with bilinear interpolation.

    image: (H, W) or (H, W, C); coords: (..., 2) as (x=col, y=row) in pixel
    units. Out-of-bounds coordinates clamp to the border pixel, which keeps
    gradients defined at the image edge (zero outside). Returns (..., C)
    or (...,) for single-channel input.
    """
    image, coords = as_tensor(image), as_tensor(coords)
    if coords.shape[-1] != 2:
        raise ContractError("coords must have trailing dimension 2")
    img = image.data
    single = img.ndim == 2
    if single:
        img = img[..., None]
    H, W, C = img.shape
    xc = np.clip(coords.data[..., 0], 0.0, W - 1.0)
    yc = np.clip(coords.data[..., 1], 0.0, H - 1.0)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    x0 = np.minimum(x0, W - 2) if W > 1 else x0 * 0
    y0 = np.minimum(y0, H - 2) if H > 1 else y0 * 0
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = (xc - x0)[..., None]
    fy = (yc - y0)[..., None]
    p00, p01 = img[y0, x0], img[y0, x1]
    p10, p11 = img[y1, x0], img[y1, x1]
    top = p00 * (1.0 - fx) + p01 * fx
    bot = p10 * (1.0 - fx) + p11 * fx
    out = top * (1.0 - fy) + bot * fy

    in_x = ((coords.data[..., 0] >= 0.0) & (coords.data[..., 0] <= W - 1.0))[..., None]
    in_y = ((coords.data[..., 1] >= 0.0) & (coords.data[..., 1] <= H - 1.0))[..., None]

    def vjp(g):
        gc = g if g.ndim == out.ndim else g[..., None]
        g_img = None
        if image.requires_grad:
            g_img = np.zeros_like(img)
            np.add.at(g_img, (y0, x0), gc * (1.0 - fx) * (1.0 - fy))
            np.add.at(g_img, (y0, x1), gc * fx * (1.0 - fy))
            np.add.at(g_img, (y1, x0), gc * (1.0 - fx) * fy)
            np.add.at(g_img, (y1, x1), gc * fx * fy)
            if single:
                g_img = g_img[..., 0]
        g_coords = None
        if coords.requires_grad:
            dx = ((p01 - p00) * (1.0 - fy) + (p11 - p10) * fy) * in_x
            dy = ((p10 - p00) * (1.0 - fx) + (p11 - p01) * fx) * in_y
            g_coords = np.stack([(gc * dx).sum(axis=-1), (gc * dy).sum(axis=-1)], axis=-1)
        return (g_img, g_coords)

    return _result(out[..., 0] if single else out, (image, coords), vjp, "bilinear_sample")


def _conv_windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]  # (B, C, Ho, Wo, kh, kw)


def conv2d(x, weight, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2D cross-correlation: x (B, C, H, W) with weight (O, C, kh, kw)."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ContractError("conv2d expects x(B,C,H,W) and weight(O,C,kh,kw)")
    if x.shape[1] != weight.shape[1]:
        raise ContractError("conv2d channel mismatch")
    B, C, H, W = x.shape
    O, _, kh, kw = weight.shape
    if H + 2 * padding < kh or W + 2 * padding < kw:
        raise ContractError("conv2d kernel larger than padded input")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = _conv_windows(xp, kh, kw, stride)
    out = np.einsum("bcxyuv,ocuv->boxy", win, weight.data, optimize=True)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[None, :, None, None]
        parents.append(bias)
    Ho, Wo = out.shape[2], out.shape[3]

    def vjp(g):
        gx = None
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for u in range(kh):
                for v in range(kw):
                    contrib = np.tensordot(g, weight.data[:, :, u, v], axes=([1], [0]))
                    gxp[:, :, u : u + stride * Ho : stride, v : v + stride * Wo : stride] += (
                        np.moveaxis(contrib, 3, 1)
                    )
            gx = gxp[:, :, padding : padding + H, padding : padding + W]
        gw = None
        if weight.requires_grad:
            gw = np.einsum("boxy,bcxyuv->ocuv", g, win, optimize=True)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)) if parents[2].requires_grad else None)
        return tuple(grads)

    return _result(out, parents, vjp, "conv2d")


def max_pool(x, k: int) -> Tensor:
    """Non-overlapping k x k max pooling on (B, C, H, W); H, W divisible by k."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ContractError("max_pool expects (B,C,H,W)")
    B, C, H, W = x.shape
    if H % k or W % k:
        raise ContractError("max_pool needs H and W divisible by k")
    win = x.data.reshape(B, C, H // k, k, W // k, k).transpose(0, 1, 2, 4, 3, 5)
    flat = win.reshape(B, C, H // k, W // k, k * k)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        gf = np.zeros_like(flat)
        np.put_along_axis(gf, arg[..., None], g[..., None], axis=-1)
        gw = gf.reshape(B, C, H // k, W // k, k, k).transpose(0, 1, 2, 4, 3, 5)
        return (gw.reshape(B, C, H, W),)

    return _result(out, (x,), vjp, "max_pool")


# ---------------------------------------------------------------------------
# variational building blocks


def reparameterize(mu, log_sigma, noise) -> Tensor:
    """mu + exp(log_sigma) * noise, differentiable in mu and log_sigma."""
    mu, log_sigma, noise = as_tensor(mu), as_tensor(log_sigma), as_tensor(noise)
    if not (mu.shape == log_sigma.shape == noise.shape):
        raise ContractError(
            f"reparameterize shape mismatch: {mu.shape}, {log_sigma.shape}, {noise.shape}"
        )
    return add(mu, mul(exp(log_sigma), noise))


def kl_diag_gaussians(mu_q, log_sigma_q) -> Tensor:
    """KL(N(mu_q, diag exp(2*log_sigma_q)) || N(0, I)), summed over all dims."""
    mu_q, log_sigma_q = as_tensor(mu_q), as_tensor(log_sigma_q)
    if mu_q.shape != log_sigma_q.shape:
        raise ContractError("kl_diag_gaussians shape mismatch")
    var = exp(mul(log_sigma_q, 2.0))
    total = tsum(add(add(var, mul(mu_q, mu_q)), add(mul(log_sigma_q, -2.0), -1.0)))
    return mul(total, 0.5)


def gaussian_log_density(x, mean, sigma) -> Tensor:
    """Elementwise diagonal-Gaussian log density, summed over all dims."""
    x, mean = as_tensor(x), as_tensor(mean)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), x.shape)
    if np.any(sigma <= 0):
        raise ContractError("sigma must be positive")
    z = div(sub(x, mean), sigma)
    quad = mul(tsum(mul(z, z)), -0.5)
    log_norm = float(np.sum(np.log(sigma * math.sqrt(TWO_PI))))
    return sub(quad, log_norm)
