"""Vectorized elementwise sin/cos.

numpy's transcendental loops fall back to scalar libm on CPUs without
AVX-512; torch ships SIMD (SLEEF) kernels that are ~10x faster here and
bit-reproducible within a run. We wrap numpy arrays zero-copy when torch
is importable and fall back to numpy otherwise.
"""

import numpy as np

try:  # optional accelerator only; all math works without it
    import torch

    torch.set_num_threads(1)
    _HAVE_TORCH = True
except Exception:  # pragma: no cover - exercised only without torch
    _HAVE_TORCH = False


def _torch_unary(fn, x: np.ndarray, out):
    if out is None:
        out = np.empty_like(x)
    fn(torch.from_numpy(x), out=torch.from_numpy(out))
    return out


def sin(x: np.ndarray, out: np.ndarray = None) -> np.ndarray:
    x = np.ascontiguousarray(x)
    if _HAVE_TORCH and x.dtype == np.float64:
        return _torch_unary(torch.sin, x, out)
    return np.sin(x, out=out)


def cos(x: np.ndarray, out: np.ndarray = None) -> np.ndarray:
    x = np.ascontiguousarray(x)
    if _HAVE_TORCH and x.dtype == np.float64:
        return _torch_unary(torch.cos, x, out)
    return np.cos(x, out=out)
