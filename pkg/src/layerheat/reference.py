"""Closed-form reference kernels used as independent oracles in tests.

Everything here is derived analytically and verified by basic PDE
identities (continuity, flux matching, unit mass), completely
independently of the transform-based evaluator.
"""
from __future__ import annotations

import math

import numpy as np

from .medium import DiffusionTensor


def gaussian_kernel(tensor: DiffusionTensor, x, t: float, y, s: float):
    """Heat kernel of a constant-coefficient anisotropic medium.

    Gamma = exp(-A^{-1}(x-y).(x-y) / (4(t-s))) / ((4 pi (t-s))^{n/2} sqrt(det A)).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    dt = t - s
    n = tensor.dim
    inv = np.linalg.inv(tensor.entries)
    diff = x - y
    quad = np.einsum("ki,ij,kj->k", diff, inv, diff)
    det = float(np.linalg.det(tensor.entries))
    vals = np.exp(-quad / (4.0 * dt)) / ((4.0 * np.pi * dt) ** (n / 2.0) * math.sqrt(det))
    return vals if vals.size > 1 else float(vals[0])


def gaussian_gradient(tensor: DiffusionTensor, x, t: float, y, s: float):
    """Spatial gradient of gaussian_kernel: -A^{-1}(x-y)/(2(t-s)) * Gamma."""
    x1 = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    dt = t - s
    inv = np.linalg.inv(tensor.entries)
    g = gaussian_kernel(tensor, x1, t, y, s)
    g = np.atleast_1d(g)
    grad = -(x1 - y) @ inv.T / (2.0 * dt) * g[:, None]
    return grad if grad.shape[0] > 1 else grad[0]


def layered_kernel_1d(a: float, b: float, x, t: float, y: float, s: float):
    """One-dimensional two-layer heat kernel (coefficient a for x>0, b for x<0).

    For a source at y > 0 the kernel is the free Gaussian plus a reflected
    Gaussian with amplitude r = (sqrt(a)-sqrt(b))/(sqrt(a)+sqrt(b)) on the
    source side, and a single transmitted Gaussian on the far side:

        x >= 0:  [ g_a(x - y) + r g_a(x + y) ]
        x <  0:  exp(-k^2/(4 dt)) / ((sqrt(a)+sqrt(b)) sqrt(pi dt)),
                 k = y/sqrt(a) - x/sqrt(b)

    with g_a(z) = exp(-z^2/(4 a dt))/sqrt(4 pi a dt).  Sources at y < 0
    follow by mirror symmetry (a <-> b, x -> -x, y -> -y).  The formula
    satisfies continuity and flux matching at x = 0 and has unit mass.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dt = t - s
    if y < 0.0:
        return layered_kernel_1d(b, a, -x, t, -y, s)
    ra, rb = math.sqrt(a), math.sqrt(b)
    refl = (ra - rb) / (ra + rb)
    out = np.empty_like(x)
    up = x >= 0.0
    out[up] = (
        np.exp(-(x[up] - y) ** 2 / (4.0 * a * dt))
        + refl * np.exp(-(x[up] + y) ** 2 / (4.0 * a * dt))
    ) / math.sqrt(4.0 * np.pi * a * dt)
    k = y / ra - x[~up] / rb
    out[~up] = np.exp(-(k**2) / (4.0 * dt)) / ((ra + rb) * math.sqrt(np.pi * dt))
    return out if out.size > 1 else float(out[0])


def layered_gradient_1d(a: float, b: float, x, t: float, y: float, s: float):
    """d/dx of layered_kernel_1d."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dt = t - s
    if y < 0.0:
        inner = layered_gradient_1d(b, a, -x, t, -y, s)
        out = -np.atleast_1d(inner)
        return out if out.size > 1 else float(out[0])
    ra, rb = math.sqrt(a), math.sqrt(b)
    refl = (ra - rb) / (ra + rb)
    out = np.empty_like(x)
    up = x >= 0.0
    out[up] = (
        -(x[up] - y) / (2.0 * a * dt) * np.exp(-(x[up] - y) ** 2 / (4.0 * a * dt))
        - refl * (x[up] + y) / (2.0 * a * dt) * np.exp(-(x[up] + y) ** 2 / (4.0 * a * dt))
    ) / math.sqrt(4.0 * np.pi * a * dt)
    k = y / ra - x[~up] / rb
    out[~up] = (
        (k / (2.0 * dt * rb))
        * np.exp(-(k**2) / (4.0 * dt))
        / ((ra + rb) * math.sqrt(np.pi * dt))
    )
    return out if out.size > 1 else float(out[0])


def interval_green_1d(
    a: float, x, t: float, y: float, s: float, half_width: float, terms: int = 40
):
    """Dirichlet Green function of u_t = a u_xx on (-L, L) by image series.

    Textbook reflected-Gaussian series, used as an independent oracle for
    the image-expansion Green builder.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dt = t - s
    length = 2.0 * half_width
    total = np.zeros_like(x)
    for m in range(-terms, terms + 1):
        total += np.exp(-(x - y - 2.0 * m * length) ** 2 / (4.0 * a * dt))
        total -= np.exp(
            -(x + y + 2.0 * half_width - 2.0 * m * length) ** 2 / (4.0 * a * dt)
        )
    total /= math.sqrt(4.0 * np.pi * a * dt)
    return total if total.size > 1 else float(total[0])
