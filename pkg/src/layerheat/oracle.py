"""Independent finite-difference reference solver.

Solves dt u = div(A grad u) (+ forcing) on an axis-aligned box in one or
two space dimensions with a conservative flux-form discretization.  The
discrete operator is assembled once as a sparse matrix and time stepping
uses a single sparse LU factorization (implicit Euler by default,
Crank-Nicolson opt-in).  The solver shares no code with the
transform-based kernel evaluator, so agreement between the two is a
genuine cross-check.

Discretization notes:

* fluxes live on faces between nodes; the normal coefficient on a face is
  the piecewise value at the face midpoint (faces normal to the interface
  have midpoints strictly inside one layer once the interface lies on a
  grid plane, so this coincides with harmonic averaging of the one-sided
  values and the discrete normal flux is continuous across the
  interface);
* tangential and mixed couplings evaluated exactly on the interface plane
  are arithmetically averaged;
* mixed-derivative terms use symmetric 4-point stencils (the average of
  the two endpoint central differences of the transverse direction);
* with no boundary condition ("none"), boundary fluxes are omitted and
  half cells are used at the boundary, so the discrete mass telescopes
  exactly (reflecting/no-flux closure of a large box).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .medium import Cube, MediumError, TwoLayerMedium


class InterfaceNotOnGrid(MediumError):
    """Layered medium but no grid plane lies on the interface."""


class SolveFailed(RuntimeError):
    """Sparse factorization/solve broke down or produced non-finite values."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor grid on a box with a fixed time step."""

    box: Cube
    nodes_per_dim: int
    dt: float
    t_span: tuple

    def __post_init__(self):
        if self.nodes_per_dim < 16:
            raise MediumError("nodes_per_dim must be >= 16")
        if not self.dt > 0.0:
            raise MediumError("dt must be positive")
        if not self.t_span[1] > self.t_span[0]:
            raise MediumError("t_span must be increasing")

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> float:
        return 2.0 * self.box.half_width / (self.nodes_per_dim - 1)

    @property
    def axes(self):
        w = self.box.half_width
        return [
            np.linspace(c - w, c + w, self.nodes_per_dim) for c in self.box.center
        ]

    @property
    def shape(self):
        return (self.nodes_per_dim,) * self.dim

    def points(self) -> np.ndarray:
        """All nodes as an (N, n) array in C order."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @property
    def n_steps(self) -> int:
        return int(round((self.t_span[1] - self.t_span[0]) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t_span[0] + self.dt * np.arange(self.n_steps + 1)


@dataclass(eq=False)
class GridFunction:
    """Solution values on grid nodes for every stored time slice."""

    grid: Grid
    values: np.ndarray  # (n_times, nodes_per_dim, [nodes_per_dim])

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def slice_at(self, t: float) -> np.ndarray:
        idx = int(round((t - self.grid.t_span[0]) / self.grid.dt))
        return self.values[idx]

    def quadrature_weights(self) -> np.ndarray:
        """Trapezoid weights matching the half-cell flux closure."""
        m = self.grid.nodes_per_dim
        h = self.grid.spacing
        w1 = np.full(m, h)
        w1[0] = w1[-1] = h / 2.0
        if self.grid.dim == 1:
            return w1
        return np.multiply.outer(w1, w1)

    def mass(self, time_index: int = -1) -> float:
        return float(np.sum(self.quadrature_weights() * self.values[time_index]))

    def interpolate(self, pts: np.ndarray, time_index: int = -1) -> np.ndarray:
        from scipy.interpolate import RegularGridInterpolator

        f = RegularGridInterpolator(self.grid.axes, self.values[time_index])
        return f(np.atleast_2d(pts))

    def to_csv(self, path: str):
        pts = self.grid.points()
        times = self.grid.times
        with open(path, "w") as fh:
            cols = ",".join(f"x{j + 1}" for j in range(self.grid.dim))
            fh.write(cols + ",t,value\n")
            for it, t in enumerate(times):
                vals = self.values[it].ravel()
                for p, v in zip(pts, vals):
                    coords = ",".join("%.17g" % c for c in p)
                    fh.write(f"{coords},{t:.17g},{v:.17g}\n")


def _piecewise_entry(medium: TwoLayerMedium, i: int, j: int, xn: np.ndarray):
    """Coefficient a_ij at points with normal coordinate xn.

    Exactly on the interface the two one-sided values are averaged (only
    tangential/mixed couplings are ever evaluated there).
    """
    up = medium.upper.entries[i, j]
    lo = medium.lower.entries[i, j]
    return np.where(xn > 0.0, up, np.where(xn < 0.0, lo, 0.5 * (up + lo)))


def _check_interface(medium: TwoLayerMedium, grid: Grid):
    if medium.is_homogeneous:
        return
    last = grid.axes[-1]
    h = grid.spacing
    if not np.any(np.abs(last) <= 1e-9 * h):
        raise InterfaceNotOnGrid(
            "no grid plane lies on the interface x_n = 0; adjust box/nodes"
        )


def _transverse_diff(shape, axis: int, h: float) -> sp.csr_matrix:
    """Central difference along ``axis`` (one-sided at the two boundaries)."""
    n_nodes = int(np.prod(shape))
    idx = np.arange(n_nodes).reshape(shape)
    rows, cols, vals = [], [], []

    def sl(a, b):
        s = [slice(None)] * len(shape)
        s[axis] = slice(a, b)
        return tuple(s)

    inner = idx[sl(1, -1)].ravel()
    plus = idx[sl(2, None)].ravel()
    minus = idx[sl(0, -2)].ravel()
    rows += [inner, inner]
    cols += [plus, minus]
    vals += [np.full(inner.size, 0.5 / h), np.full(inner.size, -0.5 / h)]
    lo = idx[sl(0, 1)].ravel()
    lo_p = idx[sl(1, 2)].ravel()
    rows += [lo, lo]
    cols += [lo_p, lo]
    vals += [np.full(lo.size, 1.0 / h), np.full(lo.size, -1.0 / h)]
    hi = idx[sl(-1, None)].ravel()
    hi_m = idx[sl(-2, -1)].ravel()
    rows += [hi, hi]
    cols += [hi, hi_m]
    vals += [np.full(hi.size, 1.0 / h), np.full(hi.size, -1.0 / h)]
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_nodes, n_nodes),
    )


def build_operator(medium: TwoLayerMedium, grid: Grid, closed: bool) -> sp.csr_matrix:
    """Sparse flux-form discretization of div(A grad .) on all nodes.

    ``closed`` selects the no-flux closure: boundary faces are omitted and
    boundary control volumes are halved, making the discrete mass an exact
    invariant.  With ``closed=False`` the rows at boundary nodes are not
    meaningful (Dirichlet solves restrict to interior rows).
    """
    _check_interface(medium, grid)
    n = grid.dim
    if n not in (1, 2):
        raise MediumError("finite-difference oracle supports n in {1, 2} only")
    shape = grid.shape
    h = grid.spacing
    n_nodes = int(np.prod(shape))
    idx = np.arange(n_nodes).reshape(shape)
    axes = grid.axes
    diffs = [_transverse_diff(shape, j, h) for j in range(n)]

    # Per-node half-cell factors along each axis (only in closed mode).
    cell = np.ones((n, n_nodes))
    if closed:
        for j in range(n):
            s = [slice(None)] * n
            c = np.ones(shape)
            s[j] = 0
            c[tuple(s)] = 0.5
            s[j] = -1
            c[tuple(s)] = 0.5
            cell[j] = c.ravel()
    volume = (h**n) * np.prod(cell, axis=0)

    op = sp.csr_matrix((n_nodes, n_nodes))
    for i in range(n):
        s_left = [slice(None)] * n
        s_left[i] = slice(0, -1)
        s_right = [slice(None)] * n
        s_right[i] = slice(1, None)
        left = idx[tuple(s_left)].ravel()
        right = idx[tuple(s_right)].ravel()
        n_faces = left.size
        # Face midpoint coordinates (only the normal coordinate matters).
        mid_axes = list(axes)
        mid_axes[i] = 0.5 * (axes[i][:-1] + axes[i][1:])
        mids = np.meshgrid(*mid_axes, indexing="ij")
        xn_face = mids[-1].ravel()

        rows_sel = np.arange(n_faces)
        p_left = sp.csr_matrix(
            (np.ones(n_faces), (rows_sel, left)), shape=(n_faces, n_nodes)
        )
        p_right = sp.csr_matrix(
            (np.ones(n_faces), (rows_sel, right)), shape=(n_faces, n_nodes)
        )
        a_ii = _piecewise_entry(medium, i, i, xn_face)
        flux = sp.diags(a_ii / h) @ (p_right - p_left)
        for j in range(n):
            if j == i:
                continue
            a_ij = _piecewise_entry(medium, i, j, xn_face)
            if not np.any(a_ij):
                continue
            flux = flux + sp.diags(a_ij) @ (0.5 * (p_left + p_right)) @ diffs[j]
        area = (h ** (n - 1)) * np.prod(
            [cell[j][left] for j in range(n) if j != i], axis=0
        ) if n > 1 else np.ones(n_faces)
        div = (p_left.T - p_right.T) @ sp.diags(area) @ flux
        op = op + sp.diags(1.0 / volume) @ div
    return op.tocsr()


def _boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for j in range(len(shape)):
        s = [slice(None)] * len(shape)
        s[j] = 0
        mask[tuple(s)] = True
        s[j] = -1
        mask[tuple(s)] = True
    return mask.ravel()


def fdm_solve(
    medium: TwoLayerMedium,
    grid: Grid,
    initial,
    bc: str = "dirichlet0",
    scheme: str = "implicit_euler",
    boundary_data=None,
    forcing=None,
) -> GridFunction:
    """Time-step dt u = div(A grad u) + forcing from the initial slice.

    ``initial`` is an array on the grid or a callable of the node array;
    ``bc`` is "dirichlet0", "dirichlet" (with ``boundary_data(points, t)``),
    or "none" (no-flux closure of a large box, mass conserving);
    ``forcing(points, t)`` adds a source term.
    """
    if scheme not in ("implicit_euler", "crank_nicolson"):
        raise MediumError(f"unknown scheme {scheme!r}")
    if bc not in ("dirichlet0", "dirichlet", "none"):
        raise MediumError(f"unknown bc {bc!r}")
    if bc == "dirichlet" and boundary_data is None:
        raise MediumError("bc='dirichlet' requires boundary_data")
    pts = grid.points()
    shape = grid.shape
    n_nodes = pts.shape[0]
    u0 = initial(pts) if callable(initial) else np.asarray(initial, dtype=float)
    u0 = u0.reshape(shape).astype(float).copy()

    op = build_operator(medium, grid, closed=(bc == "none"))
    dt = grid.dt
    times = grid.times
    theta = 1.0 if scheme == "implicit_euler" else 0.5

    bmask = _boundary_mask(shape)
    if bc == "none":
        active = np.ones(n_nodes, dtype=bool)
    else:
        active = ~bmask
    a_idx = np.where(active)[0]
    b_idx = np.where(~active)[0]
    op_aa = op[a_idx][:, a_idx].tocsc()
    op_ab = op[a_idx][:, b_idx].tocsr() if b_idx.size else None
    eye = sp.identity(a_idx.size, format="csc")
    try:
        lu = splu((eye - dt * theta * op_aa).tocsc())
    except Exception as exc:  # pragma: no cover - scipy raises various types
        raise SolveFailed(f"factorization failed: {exc}") from exc

    def bvals(t):
        if bc == "dirichlet0":
            return np.zeros(b_idx.size)
        return np.asarray(boundary_data(pts[b_idx], t), dtype=float)

    u = u0.ravel().copy()
    if bc != "none":
        u[b_idx] = bvals(times[0])
    history = np.empty((grid.n_steps + 1,) + shape)
    history[0] = u.reshape(shape)
    for m in range(grid.n_steps):
        t_new = times[m + 1]
        rhs = u[a_idx] + dt * (1.0 - theta) * (op_aa @ u[a_idx])
        if op_ab is not None:
            g_old = u[b_idx]
            g_new = bvals(t_new)
            rhs = rhs + dt * (
                theta * (op_ab @ g_new) + (1.0 - theta) * (op_ab @ g_old)
            )
        if forcing is not None:
            f_new = np.asarray(forcing(pts[a_idx], t_new), dtype=float)
            if theta < 1.0:
                f_old = np.asarray(forcing(pts[a_idx], times[m]), dtype=float)
                rhs = rhs + dt * (theta * f_new + (1.0 - theta) * f_old)
            else:
                rhs = rhs + dt * f_new
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise SolveFailed(f"non-finite values at step {m + 1}")
        u[a_idx] = sol
        if bc != "none":
            u[b_idx] = bvals(t_new)
        history[m + 1] = u.reshape(shape)
    return GridFunction(grid=grid, values=history)


def approximate_kernel(
    medium: TwoLayerMedium,
    y,
    eps: float,
    grid: Grid,
    scheme: str = "implicit_euler",
) -> GridFunction:
    """Evolve a normalized discrete Gaussian of width eps from t_span[0].

    The result approximates the kernel column Gamma(., t; y, t0) mollified
    in the source variable with a Gaussian of standard deviation eps.
    """
    if eps < 2.0 * grid.spacing:
        raise MediumError("mollification width must be >= 2 grid spacings")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    pts = grid.points()
    r2 = np.sum((pts - y) ** 2, axis=1)
    u0 = np.exp(-r2 / (2.0 * eps * eps)).reshape(grid.shape)
    gf0 = GridFunction(grid=grid, values=u0[None])
    u0 = u0 / gf0.mass(0)
    return fdm_solve(medium, grid, u0, bc="none", scheme=scheme)


def interior_solution_sampler(
    medium: TwoLayerMedium,
    boundary_data,
    grid: Grid,
    scheme: str = "implicit_euler",
) -> GridFunction:
    """Homogeneous solution driven by Dirichlet data from a generator.

    The initial slice is the generator evaluated at the initial time, so
    steady generators reproduce steady states exactly.
    """
    t0 = grid.t_span[0]
    initial = lambda pts: np.asarray(boundary_data(pts, t0), dtype=float)
    return fdm_solve(
        medium, grid, initial, bc="dirichlet",
        scheme=scheme, boundary_data=boundary_data,
    )


def random_boundary_generator(dim: int, seed: int, n_modes: int = 4, scale: float = 1.0):
    """Reproducible smooth space-time boundary data for the sampler."""
    rng = np.random.default_rng(seed)
    amp = scale * rng.standard_normal((n_modes,))
    freq = rng.uniform(0.3, 1.5, size=(n_modes, dim))
    rate = rng.uniform(0.0, 1.0, size=n_modes)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)

    def gen(pts, t):
        pts = np.atleast_2d(pts)
        out = np.zeros(pts.shape[0])
        for k in range(n_modes):
            out += amp[k] * np.sin(pts @ freq[k] + phase[k]) * math.exp(-rate[k] * t)
        return out

    return gen
