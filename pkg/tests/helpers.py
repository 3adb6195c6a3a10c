"""Shared test utilities: finite-difference oracles kept independent of the
autodiff implementation they check."""
import numpy as np

from aimsim import tape as T


def central_difference(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Gradient of scalar fn(x) by central differences, elementwise."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_hi = fn(x)
        flat[i] = orig - step
        f_lo = fn(x)
        flat[i] = orig
        gflat[i] = (f_hi - f_lo) / (2.0 * step)
    return grad


def tape_gradient(build_loss, values):
    """Run build_loss(list-of-leaf-Tensors) under a fresh tape and return the
    leaf gradients in order."""
    leaves = [T.Tensor(v, requires_grad=True) for v in values]
    with T.Tape() as tp:
        loss = build_loss(leaves)
        tp.backward(loss)
    return [leaf.grad for leaf in leaves]


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-12) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    denom = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), floor)
    return float(np.linalg.norm((a - b).ravel()) / denom)
