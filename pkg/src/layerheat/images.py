"""Dirichlet Green functions built from the free kernel by reflections.

A Dirichlet problem on a half-space or an axis-aligned cube is solved by
extending the coefficients evenly across each face (off-diagonal entries
in the face row/column change sign) and subtracting mirror-image sources.
The construction is only exact when the extended coefficient field is
again one of the media the kernel evaluator can handle; configurations
where the extension would create additional interfaces are rejected with
UnsupportedGeometry rather than silently approximated:

* reflecting across a face perpendicular to the material interface
  requires both layers to be invariant under that reflection;
* reflecting across a face parallel to the interface requires either a
  homogeneous medium (the extension then creates a two-layer medium whose
  interface is the face itself - still computable) or a face placed so
  the domain does not straddle the material interface;
* the full cube expansion iterates reflections across every face and is
  supported for homogeneous media invariant under all axis reflections.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .medium import Cube, DiffusionTensor, KernelQuery, MediumError, TwoLayerMedium
from .inverse_transform import KernelEvaluator, KernelValue, QuadratureConfig


class UnsupportedGeometry(ValueError):
    """Face/interface configuration outside the reflection construction."""


class TruncationInsufficient(RuntimeError):
    """Image-series tail bound exceeds the target tolerance."""


def reflect_tensor(tensor: DiffusionTensor, axis: int) -> DiffusionTensor:
    """Coefficient tensor of the evenly reflected operator (involution)."""
    return tensor.reflected(axis)


@dataclass(frozen=True)
class GreenValue:
    """Green function value with both gradients and error estimate."""

    gamma: float
    grad: np.ndarray       # gradient in the target (first) argument
    grad_source: np.ndarray  # gradient in the source (second) argument
    est_error: float


def _nudge_off_interface(z: np.ndarray) -> np.ndarray:
    """Shift exactly-zero normal coordinates by a negligible amount.

    The kernel is continuous across the interface; image bookkeeping can
    place points exactly on it, where the evaluator would refuse a
    one-sided classification.
    """
    z = z.copy()
    col = z[:, -1]
    col[col == 0.0] = 1e-300
    return z


class HalfSpaceGreen:
    """Dirichlet Green function of the half-space {side*(x_axis - offset) > 0}."""

    def __init__(
        self,
        medium: TwoLayerMedium,
        axis: int,
        offset: float,
        side: int = 1,
        cfg: QuadratureConfig | None = None,
    ):
        n = medium.dim
        if not 0 <= axis < n:
            raise UnsupportedGeometry(f"axis {axis} out of range for dim {n}")
        if side not in (1, -1):
            raise UnsupportedGeometry("side must be +1 or -1")
        self.medium = medium
        self.axis = axis
        self.offset = float(offset)
        self.side = side
        self.dim = n
        if axis == n - 1:
            # Face parallel to the material interface.
            if medium.is_homogeneous:
                base = medium.upper
            elif side * offset >= 0.0:
                # Domain excluded from the interface: single-layer problem.
                base = medium.upper if side > 0 else medium.lower
            else:
                raise UnsupportedGeometry(
                    "reflection across a face parallel to the interface of a "
                    "genuinely two-layer medium is outside the construction"
                )
            tensor = base if side > 0 else base.reflected(axis)
            self._kernel_medium = TwoLayerMedium(
                upper=tensor, lower=tensor.reflected(axis)
            )
            self._mode = "parallel"
        else:
            if not (
                medium.upper.is_reflection_invariant(axis)
                and medium.lower.is_reflection_invariant(axis)
            ):
                raise UnsupportedGeometry(
                    "perpendicular-face reflection requires both layers to be "
                    f"invariant under reflection of axis {axis}"
                )
            self._kernel_medium = medium
            self._mode = "perpendicular"
        self._ev = KernelEvaluator(self._kernel_medium, cfg)

    def _check_inside(self, pts: np.ndarray):
        if np.any(self.side * (pts[:, self.axis] - self.offset) <= 0.0):
            raise MediumError("points must lie strictly inside the half-space")

    def _to_frame(self, pts: np.ndarray) -> np.ndarray:
        """Map to the evaluation frame where the face is {z_n = 0, z_n > 0}."""
        if self._mode == "perpendicular":
            return pts
        z = pts.copy()
        z[:, -1] = self.side * (pts[:, -1] - self.offset)
        return z

    def evaluate_many(self, x, t, y, s, source_gradient: bool = True):
        n = self.dim
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = np.broadcast_to(y, x.shape).copy()
        self._check_inside(x)
        self._check_inside(y)
        zx = self._to_frame(x)
        zy = self._to_frame(y)
        ax = n - 1 if self._mode == "parallel" else self.axis
        zy_img = zy.copy()
        if self._mode == "parallel":
            zy_img[:, ax] = -zy[:, ax]
        else:
            zy_img[:, ax] = 2.0 * self.offset - zy[:, ax]
        k = x.shape[0]
        res = self._ev.eval_many(
            np.vstack([_nudge_off_interface(zx)] * 2),
            t,
            _nudge_off_interface(np.vstack([zy, zy_img])),
            s,
            source_gradient=source_gradient,
        )
        gamma = res["gamma"][:k] - res["gamma"][k:]
        grad = res["grad"][:k] - res["grad"][k:]
        est = res["est"][:k] + res["est"][k:]
        if self._mode == "parallel" and self.side == -1:
            grad = grad.copy()
            grad[:, -1] *= -1.0
        sgrad = None
        if source_gradient:
            sg_dir = res["sgrad"][:k]
            sg_img = res["sgrad"][k:]
            sg_img = sg_img.copy()
            sg_img[:, ax] *= -1.0  # chain rule through the source reflection
            sgrad = sg_dir - sg_img
            if self._mode == "parallel" and self.side == -1:
                sgrad[:, -1] *= -1.0
        return {"gamma": gamma, "grad": grad, "sgrad": sgrad, "est": est}

    def evaluate(self, x, t, y, s) -> GreenValue:
        res = self.evaluate_many(np.atleast_1d(x)[None, :], t, np.atleast_1d(y), s)
        return GreenValue(
            gamma=float(res["gamma"][0]),
            grad=res["grad"][0],
            grad_source=res["sgrad"][0],
            est_error=float(res["est"][0]),
        )


@dataclass(frozen=True)
class ImageExpansion:
    """Mirror-image sources of a point in a cube, with alternating signs."""

    points: np.ndarray   # (T, n)
    signs: np.ndarray    # (T,) of +-1
    source_jacobians: np.ndarray  # (T, n) diagonal of d(image)/d(source)
    truncation_depth: int


def _image_lattice(cube: Cube, depth: int):
    """Affine description of the reflection lattice: image = jac*y + off.

    Per axis, the images of a source coordinate u in (c-w, c+w) under the
    reflection group of the interval are u + 4wm (even parity) and
    2(c-w) - u + 4wm (odd parity), m = -depth..depth; the term sign is the
    product of parities.  Enumeration order is lexicographic for
    reproducibility.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    w = cube.half_width
    axes = []
    for j in range(cube.dim):
        c = cube.center[j]
        entries = []
        for m in range(-depth, depth + 1):
            entries.append((1.0, 4.0 * w * m, 1))
            entries.append((-1.0, 2.0 * (c - w) + 4.0 * w * m, -1))
        axes.append(entries)
    jacs, offs, signs = [], [], []
    for combo in itertools.product(*axes):
        jacs.append([e[0] for e in combo])
        offs.append([e[1] for e in combo])
        signs.append(int(np.prod([e[2] for e in combo])))
    return np.array(jacs), np.array(offs), np.array(signs)


def build_image_expansion(cube: Cube, y, depth: int) -> ImageExpansion:
    """Lattice of iterated reflections of y across the cube faces."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    jac, off, signs = _image_lattice(cube, depth)
    return ImageExpansion(
        points=jac * y + off,
        signs=signs,
        source_jacobians=jac,
        truncation_depth=depth,
    )


class CubeGreen:
    """Dirichlet Green function of an axis-aligned cube via image series."""

    def __init__(
        self,
        medium: TwoLayerMedium,
        cube: Cube,
        cfg: QuadratureConfig | None = None,
        depth: int = 2,
        tail_constant: float | None = None,
        tail_tol: float = 1e-5,
    ):
        if cube.dim != medium.dim:
            raise UnsupportedGeometry("cube and medium dimensions differ")
        if not medium.is_homogeneous:
            raise UnsupportedGeometry(
                "cube image expansion requires a homogeneous medium (layered "
                "parallel-face reflections create extra interfaces)"
            )
        tensor = medium.upper
        for ax in range(medium.dim):
            if not tensor.is_reflection_invariant(ax):
                raise UnsupportedGeometry(
                    f"tensor is not invariant under reflection of axis {ax}"
                )
        self.medium = medium
        self.cube = cube
        self.depth = int(depth)
        self.tail_constant = tail_constant
        self.tail_tol = tail_tol
        self._ev = KernelEvaluator(medium, cfg)
        self._det = float(np.linalg.det(tensor.entries))
        self._lam_max = float(np.linalg.eigvalsh(tensor.entries).max())

    def tail_bound(self, dt: float) -> float:
        """Upper bound on the omitted image-series tail.

        Shell j (largest per-axis lattice index j > depth) contributes
        images at distance at least 4w(j-1) from any target in the cube;
        each term is bounded by a Gaussian estimate of the kernel.  When a
        fitted Gaussian-bound constant is supplied it is used with a x2
        safety factor, otherwise the exact homogeneous bound applies.
        """
        n = self.medium.dim
        w = self.cube.half_width
        if self.tail_constant is not None:
            pref = 2.0 * self.tail_constant / dt ** (n / 2.0)
            rate = self.tail_constant * dt
        else:
            pref = (4.0 * np.pi * dt) ** (-n / 2.0) / math.sqrt(self._det)
            rate = 4.0 * self._lam_max * dt
        total = 0.0
        for j in range(self.depth + 1, self.depth + 81):
            cnt = (2 * (2 * j + 1)) ** n - (2 * (2 * j - 1)) ** n
            d = 4.0 * w * (j - 1)
            total += cnt * pref * math.exp(-(d * d) / rate)
        return total

    def evaluate_many(self, x, t, y, s, source_gradient: bool = True):
        n = self.medium.dim
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            y = np.broadcast_to(y, x.shape)
        elif x.shape[0] == 1 and y.shape[0] > 1:
            x = np.broadcast_to(x, y.shape)
        if not all(self.cube.contains(p) for p in y):
            raise MediumError("sources must lie strictly inside the cube")
        dt = float(t) - float(s)
        tail = self.tail_bound(dt)
        scale = (4.0 * np.pi * dt) ** (-n / 2.0) / math.sqrt(self._det)
        if tail > self.tail_tol * scale:
            raise TruncationInsufficient(
                f"image tail bound {tail:.3e} exceeds {self.tail_tol:.1e} x "
                f"kernel scale {scale:.3e}; increase depth"
            )
        jac, off, lat_signs = _image_lattice(self.cube, self.depth)
        t_cnt = jac.shape[0]
        k = x.shape[0]
        xs = np.repeat(x, t_cnt, axis=0)
        ys = (y[:, None, :] * jac[None, :, :] + off[None, :, :]).reshape(k * t_cnt, n)
        res = self._ev.eval_many(
            _nudge_off_interface(xs), t, _nudge_off_interface(ys), s,
            source_gradient=source_gradient,
        )
        signs = np.tile(lat_signs, k)
        gamma = (signs * res["gamma"]).reshape(k, t_cnt).sum(axis=1)
        grad = (signs[:, None] * res["grad"]).reshape(k, t_cnt, n).sum(axis=1)
        est = res["est"].reshape(k, t_cnt).sum(axis=1) + tail
        sgrad = None
        if source_gradient:
            jac_full = np.tile(jac, (k, 1))
            sgrad = (
                (signs[:, None] * jac_full * res["sgrad"]).reshape(k, t_cnt, n).sum(axis=1)
            )
        return {"gamma": gamma, "grad": grad, "sgrad": sgrad, "est": est}

    def evaluate(self, x, t, y, s) -> GreenValue:
        res = self.evaluate_many(np.atleast_1d(x)[None, :], t, y, s)
        return GreenValue(
            gamma=float(res["gamma"][0]),
            grad=res["grad"][0],
            grad_source=res["sgrad"][0],
            est_error=float(res["est"][0]),
        )

    def boundary_samples(self, per_face: int = 5) -> np.ndarray:
        """Deterministic sample points on the cube boundary."""
        n = self.medium.dim
        w, c = self.cube.half_width, self.cube.center
        ticks = np.linspace(-w, w, per_face + 2)[1:-1]
        pts = []
        for ax in range(n):
            for sgn in (-1.0, 1.0):
                if n == 1:
                    pts.append([c[0] + sgn * w])
                else:
                    free = [ticks + c[j] for j in range(n) if j != ax]
                    for combo in itertools.product(*free):
                        p = list(combo)
                        p.insert(ax, c[ax] + sgn * w)
                        pts.append(p)
        return np.array(pts)


class AdjointGreen:
    """Backward-time adjoint of a Green evaluator: G*(x,t;y,s) = G(y,s;x,t)."""

    def __init__(self, base):
        self.base = base

    def evaluate_many(self, x, t, y, s, source_gradient: bool = True):
        res = self.base.evaluate_many(y, s, x, t, source_gradient=True)
        return {
            "gamma": res["gamma"],
            "grad": res["sgrad"],
            "sgrad": res["grad"],
            "est": res["est"],
        }

    def evaluate(self, x, t, y, s) -> GreenValue:
        g = self.base.evaluate(np.atleast_1d(y), s, np.atleast_1d(x), t)
        return GreenValue(
            gamma=g.gamma, grad=g.grad_source, grad_source=g.grad,
            est_error=g.est_error,
        )


def adjoint_green(evaluator):
    """Adjoint evaluator; applying it twice returns the original object."""
    if isinstance(evaluator, AdjointGreen):
        return evaluator.base
    return AdjointGreen(evaluator)


def half_space_green(
    medium: TwoLayerMedium,
    face,
    q: KernelQuery,
    cfg: QuadratureConfig | None = None,
) -> KernelValue:
    """One-shot half-space Green evaluation; face = (axis, offset, side)."""
    axis, offset, side = face
    hs = HalfSpaceGreen(medium, axis, offset, side, cfg)
    g = hs.evaluate(q.x, q.t, q.y, q.s)
    return KernelValue(gamma=g.gamma, grad=g.grad, est_error=g.est_error)


def cube_green(
    medium: TwoLayerMedium,
    cube: Cube,
    q: KernelQuery,
    cfg: QuadratureConfig | None = None,
    depth: int = 2,
    tail_constant: float | None = None,
) -> KernelValue:
    """One-shot cube Green evaluation by truncated image series."""
    cg = CubeGreen(medium, cube, cfg, depth=depth, tail_constant=tail_constant)
    g = cg.evaluate(q.x, q.t, q.y, q.s)
    return KernelValue(gamma=g.gamma, grad=g.grad, est_error=g.est_error)


def volume_potential(
    gstar,
    force,
    x,
    t: float,
    domain: Cube,
    t0: float,
    n_time: int = 24,
    n_space: int = 40,
) -> float:
    """Representation-formula integral
    -Int_{t0}^{t} Int_domain F(y,s) . grad_y G*(y,s;x,t) dy ds.

    ``gstar`` is an adjoint Green evaluator; ``force`` maps (points (K,n),
    s) to a (K, n) vector field.  The time integral uses the substitution
    s = t - sigma^2 to absorb the kernel's short-time singularity.
    """
    from numpy.polynomial.legendre import leggauss

    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = domain.dim
    sig_max = math.sqrt(t - t0)
    xs, ws = leggauss(n_time)
    sig = 0.5 * sig_max * (xs + 1.0)
    wsig = 0.5 * sig_max * ws
    xg, wg = leggauss(n_space)

    def tensor_grid(lo, hi):
        axes = [
            (0.5 * (lo[j] + hi[j]) + 0.5 * (hi[j] - lo[j]) * xg,
             0.5 * (hi[j] - lo[j]) * wg)
            for j in range(n)
        ]
        if n == 1:
            return axes[0][0][:, None], axes[0][1]
        grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
        wgt = np.meshgrid(*[a[1] for a in axes], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack([w.ravel() for w in wgt]), axis=0)
        return pts, wts

    w_half = domain.half_width
    lo_full = domain.center - w_half
    hi_full = domain.center + w_half
    pts_full, wts_full = tensor_grid(lo_full, hi_full)
    # Near s = t the gradient kernel concentrates in a ball of radius
    # O(sigma) around x; below this threshold the global grid cannot
    # resolve it, so a window scaled with sigma is used instead.
    lam = 1.0
    if hasattr(gstar, "base") and hasattr(gstar.base, "medium"):
        lam = gstar.base.medium.max_eigenvalue()
    elif hasattr(gstar, "medium"):
        lam = gstar.medium.max_eigenvalue()
    sigma_split = 6.0 * (2.0 * w_half / n_space) / math.sqrt(lam)
    total = 0.0
    for sg, wv in zip(sig, wsig):
        s = t - sg * sg
        if sg < sigma_split:
            half = 10.0 * math.sqrt(lam) * sg
            lo = np.maximum(lo_full, x - half)
            hi = np.minimum(hi_full, x + half)
            pts, wts = tensor_grid(lo, hi)
        else:
            pts, wts = pts_full, wts_full
        res = gstar.evaluate_many(pts, s, x, t, source_gradient=False)
        f_val = np.asarray(force(pts, s), dtype=float)
        integrand = np.einsum("kj,kj->k", f_val, res["grad"])
        total += 2.0 * sg * wv * float(np.sum(wts * integrand))
    return -total
