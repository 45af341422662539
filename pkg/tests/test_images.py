import numpy as np
import pytest

from layerheat.medium import (
    Cube,
    KernelQuery,
    MediumError,
    TwoLayerMedium,
    homogeneous_medium,
    validate_tensor,
)
from layerheat.images import (
    AdjointGreen,
    CubeGreen,
    HalfSpaceGreen,
    TruncationInsufficient,
    UnsupportedGeometry,
    adjoint_green,
    build_image_expansion,
    cube_green,
    half_space_green,
    reflect_tensor,
    volume_potential,
)
from layerheat.inverse_transform import KernelEvaluator
from layerheat.reference import gaussian_kernel, interval_green_1d, layered_kernel_1d


def layered_1d(a=1.0, b=4.0):
    return TwoLayerMedium(upper=validate_tensor([[a]]), lower=validate_tensor([[b]]))


class TestReflectTensor:
    def test_offdiagonal_sign_flip(self):
        t = validate_tensor([[2.0, 1.0], [1.0, 2.0]])
        r = reflect_tensor(t, 0)
        assert np.array_equal(r.entries, [[2.0, -1.0], [-1.0, 2.0]])

    def test_involution(self):
        t = validate_tensor([[1.5, 0.3], [0.3, 2.5]])
        assert reflect_tensor(reflect_tensor(t, 1), 1) == t


class TestHalfSpaceGreen:
    def test_homogeneous_1d_matches_reflection_formula(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        hs = HalfSpaceGreen(med, axis=0, offset=0.0, side=1)
        xs = np.linspace(0.1, 2.5, 15)[:, None]
        res = hs.evaluate_many(xs, 0.5, np.array([0.7]), 0.0)
        exact = gaussian_kernel(med.upper, xs, 0.5, np.array([0.7]), 0.0) - \
            gaussian_kernel(med.upper, xs, 0.5, np.array([-0.7]), 0.0)
        assert np.max(np.abs(res["gamma"] - exact)) < 1e-10

    def test_dirichlet_boundary_value(self):
        med = homogeneous_medium(validate_tensor([[2.0, 1.0], [1.0, 2.0]]))
        # perpendicular faces need reflection invariance; use parallel face
        hs = HalfSpaceGreen(med, axis=1, offset=0.25, side=1)
        bdry = np.array([[u, 0.25 + 1e-12] for u in (-0.5, 0.0, 0.8)])
        res = hs.evaluate_many(bdry, 0.4, np.array([0.3, 0.9]), 0.0)
        assert np.max(np.abs(res["gamma"])) < 1e-8

    def test_offset_face_homogeneous(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        hs = HalfSpaceGreen(med, axis=0, offset=-1.0, side=1)
        x = np.array([[0.5]])
        res = hs.evaluate_many(x, 0.5, np.array([0.2]), 0.0)
        exact = gaussian_kernel(med.upper, x, 0.5, np.array([0.2]), 0.0) - \
            gaussian_kernel(med.upper, x, 0.5, np.array([-2.2]), 0.0)
        assert abs(res["gamma"][0] - exact) < 1e-10

    def test_layered_parallel_face_away_from_interface(self):
        # domain {x > 1} lies entirely in the upper layer; the Green
        # function is that of the homogeneous upper coefficient
        med = layered_1d(1.0, 4.0)
        hs = HalfSpaceGreen(med, axis=0, offset=1.0, side=1)
        x = np.array([[1.8]])
        res = hs.evaluate_many(x, 0.3, np.array([1.4]), 0.0)
        t_up = med.upper
        exact = gaussian_kernel(t_up, x, 0.3, np.array([1.4]), 0.0) - \
            gaussian_kernel(t_up, x, 0.3, np.array([0.6]), 0.0)
        assert abs(res["gamma"][0] - exact) < 1e-9

    def test_layered_straddling_face_rejected(self):
        med = layered_1d()
        with pytest.raises(UnsupportedGeometry):
            HalfSpaceGreen(med, axis=0, offset=-0.5, side=1)

    def test_perpendicular_face_requires_invariance(self):
        med = homogeneous_medium(validate_tensor([[2.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(UnsupportedGeometry):
            HalfSpaceGreen(med, axis=0, offset=0.0, side=1)

    def test_perpendicular_face_layered_diagonal(self):
        med = TwoLayerMedium(
            upper=validate_tensor([[1.0, 0.0], [0.0, 1.0]]),
            lower=validate_tensor([[2.0, 0.0], [0.0, 3.0]]),
        )
        hs = HalfSpaceGreen(med, axis=0, offset=0.0, side=1)
        bdry = np.array([[1e-12, 0.6], [1e-12, -0.4]])
        res = hs.evaluate_many(bdry, 0.4, np.array([0.5, 0.3]), 0.1)
        assert np.max(np.abs(res["gamma"])) < 1e-8

    def test_points_outside_rejected(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        hs = HalfSpaceGreen(med, axis=0, offset=0.0, side=1)
        with pytest.raises(MediumError):
            hs.evaluate_many(np.array([[-0.1]]), 0.5, np.array([0.7]), 0.0)
        with pytest.raises(MediumError):
            hs.evaluate_many(np.array([[0.1]]), 0.5, np.array([-0.7]), 0.0)

    def test_maximum_principle(self):
        # 0 < G <= Gamma strictly inside, for a layered half-space with a
        # face away from the interface
        med = layered_1d()
        hs = HalfSpaceGreen(med, axis=0, offset=0.5, side=1)
        ev = KernelEvaluator(med)
        xs = np.linspace(0.6, 3.0, 12)[:, None]
        res = hs.evaluate_many(xs, 0.4, np.array([1.2]), 0.0)
        free = ev.eval_many(xs, 0.4, np.array([1.2]), 0.0)
        assert np.all(res["gamma"] > 0.0)
        assert np.all(res["gamma"] <= free["gamma"] + 1e-14)

    def test_one_shot_wrapper(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        q = KernelQuery(x=np.array([0.5]), t=0.5, y=np.array([0.7]), s=0.0)
        kv = half_space_green(med, (0, 0.0, 1), q)
        exact = gaussian_kernel(med.upper, np.array([[0.5]]), 0.5, np.array([0.7]), 0.0) - \
            gaussian_kernel(med.upper, np.array([[0.5]]), 0.5, np.array([-0.7]), 0.0)
        assert abs(kv.gamma - exact) < 1e-10


class TestImageExpansion:
    def test_depth_one_counts(self):
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        exp = build_image_expansion(cube, np.array([0.3]), depth=1)
        assert exp.points.shape == (6, 1)
        assert set(np.unique(exp.signs)) == {-1, 1}
        assert exp.truncation_depth == 1

    def test_contains_source_with_plus_sign(self):
        cube = Cube(half_width=1.0, center=np.array([0.2, -0.1]))
        y = np.array([0.5, 0.3])
        exp = build_image_expansion(cube, y, depth=1)
        idx = np.where(np.all(np.abs(exp.points - y) < 1e-14, axis=1))[0]
        assert idx.size == 1
        assert exp.signs[idx[0]] == 1

    def test_deterministic(self):
        cube = Cube(half_width=0.8, center=np.array([0.0, 0.0]))
        a = build_image_expansion(cube, np.array([0.1, -0.2]), depth=2)
        b = build_image_expansion(cube, np.array([0.1, -0.2]), depth=2)
        assert np.array_equal(a.points, b.points)
        assert np.array_equal(a.signs, b.signs)


class TestCubeGreen:
    def test_matches_interval_series_1d(self):
        med = homogeneous_medium(validate_tensor([[1.3]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        cg = CubeGreen(med, cube, depth=3)
        xs = np.linspace(-0.9, 0.9, 13)[:, None]
        res = cg.evaluate_many(xs, 0.5, np.array([0.3]), 0.0)
        exact = interval_green_1d(1.3, xs[:, 0], 0.5, 0.3, 0.0, 1.0)
        assert np.max(np.abs(res["gamma"] - exact)) < 1e-9

    def test_boundary_nearly_zero(self):
        med = homogeneous_medium(validate_tensor([[1.0, 0.0], [0.0, 2.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0, 0.0]))
        cg = CubeGreen(med, cube, depth=2)
        bdry = cg.boundary_samples(per_face=3)
        res = cg.evaluate_many(bdry, 0.2, np.array([0.1, -0.3]), 0.0)
        assert np.max(np.abs(res["gamma"])) <= cg.tail_bound(0.2) + 10.0 * np.max(res["est"]) + 1e-12

    def test_maximum_principle(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        cg = CubeGreen(med, cube, depth=3)
        ev = KernelEvaluator(med)
        xs = np.linspace(-0.8, 0.8, 8)[:, None]
        res = cg.evaluate_many(xs, 0.3, np.array([0.2]), 0.0)
        free = ev.eval_many(xs, 0.3, np.array([0.2]), 0.0)
        assert np.all(res["gamma"] > 0.0)
        assert np.all(res["gamma"] <= free["gamma"] + 1e-14)

    def test_layered_rejected(self):
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        with pytest.raises(UnsupportedGeometry):
            CubeGreen(layered_1d(), cube)

    def test_noninvariant_tensor_rejected(self):
        med = homogeneous_medium(validate_tensor([[2.0, 1.0], [1.0, 2.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0, 0.0]))
        with pytest.raises(UnsupportedGeometry):
            CubeGreen(med, cube)

    def test_truncation_guard(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=0.2, center=np.array([0.0]))
        cg = CubeGreen(med, cube, depth=1)
        # long time, tiny cube: depth 1 cannot meet the tolerance
        with pytest.raises(TruncationInsufficient):
            cg.evaluate_many(np.array([[0.05]]), 5.0, np.array([0.1]), 0.0)

    def test_deeper_truncation_smaller_boundary_value(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        sups = []
        for depth in (1, 2):
            cg = CubeGreen(med, cube, depth=depth)
            res = cg.evaluate_many(np.array([[1.0]]), 0.25, np.array([0.2]), 0.0)
            sups.append(abs(res["gamma"][0]))
        assert sups[1] < sups[0]

    def test_one_shot_wrapper(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        q = KernelQuery(x=np.array([0.4]), t=0.3, y=np.array([-0.2]), s=0.0)
        kv = cube_green(med, cube, q, depth=3)
        exact = interval_green_1d(1.0, 0.4, 0.3, -0.2, 0.0, 1.0)
        assert abs(kv.gamma - exact) < 1e-10


class TestAdjoint:
    def test_involution_returns_base(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        cg = CubeGreen(med, cube)
        assert adjoint_green(adjoint_green(cg)) is cg

    def test_values_bit_exact(self):
        med = homogeneous_medium(validate_tensor([[1.0, 0.0], [0.0, 2.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0, 0.0]))
        cg = CubeGreen(med, cube)
        adj = adjoint_green(cg)
        x, y = np.array([0.3, -0.2]), np.array([-0.4, 0.5])
        direct = cg.evaluate(x, 0.5, y, 0.1)
        swapped = adj.evaluate(y, 0.1, x, 0.5)
        assert swapped.gamma == direct.gamma
        assert np.array_equal(swapped.grad, direct.grad_source)
        assert np.array_equal(swapped.grad_source, direct.grad)


class TestVolumePotential:
    def test_manufactured_eigenfunction(self):
        # w(x, t) solving w_t = a w_xx - div F with w = 0 on the boundary:
        # F = grad(phi), phi = cos(pi x / (2 L)) gives
        # w = phi(x) (exp(-a lam (t - t0)) - 1)/a, lam = (pi/(2L))^2.
        a, half = 1.0, 1.0
        med = homogeneous_medium(validate_tensor([[a]]))
        cube = Cube(half_width=half, center=np.array([0.0]))
        gstar = AdjointGreen(CubeGreen(med, cube, depth=3))
        lam = (np.pi / (2.0 * half)) ** 2

        def force(pts, s):
            return -np.pi / (2.0 * half) * np.sin(np.pi * pts[:, :1] / (2.0 * half))

        x, t, t0 = np.array([0.3]), 0.4, 0.0
        val = volume_potential(gstar, force, x, t, cube, t0)
        exact = np.cos(np.pi * x[0] / (2.0 * half)) * (np.exp(-a * lam * (t - t0)) - 1.0) / a
        assert abs(val - exact) < 1e-6 * abs(exact)

    def test_zero_force_zero_potential(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        gstar = AdjointGreen(CubeGreen(med, cube, depth=2))
        val = volume_potential(
            gstar, lambda pts, s: np.zeros_like(pts), np.array([0.2]), 0.3, cube, 0.0,
            n_time=6, n_space=10,
        )
        assert val == 0.0

    def test_linearity(self):
        med = homogeneous_medium(validate_tensor([[1.0]]))
        cube = Cube(half_width=1.0, center=np.array([0.0]))
        gstar = AdjointGreen(CubeGreen(med, cube, depth=2))
        f = lambda pts, s: np.sin(pts)
        x, t, t0 = np.array([0.1]), 0.25, 0.0
        v1 = volume_potential(gstar, f, x, t, cube, t0, n_time=8, n_space=16)
        v2 = volume_potential(
            gstar, lambda p, s: 3.0 * f(p, s), x, t, cube, t0, n_time=8, n_space=16
        )
        assert v2 == pytest.approx(3.0 * v1, rel=1e-12)
