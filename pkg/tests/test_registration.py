import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pearson
from wotf_probe.datasets import generate_dataset
from wotf_probe.registration import (AffineParams, SimplexConfig, apply_affine, compose,
                                     corner_error, nelder_mead, nmi, register, warp_affine)


@pytest.fixture(scope="module")
def texture():
    return generate_dataset("texture", 11, 1, 64, ratios=(0, 0, 1)).images("test")[0].astype(float)


class TestAffine:
    def test_geometry_and_inverse(self):
        p = AffineParams.from_geometry(90, 2.0, (1, -1))
        assert np.allclose(p.matrix, [[0, -2], [2, 0]], atol=1e-15)
        q = compose(p.inverse(), p)
        assert np.allclose(q.as_array(), AffineParams().as_array(), atol=1e-12)
        assert AffineParams.from_array(p.as_array()) == p
        assert set(p.to_dict()) == {"a11", "a12", "a21", "a22", "tx", "ty"}

    def test_singular(self):
        with pytest.raises(ValueError, match="singular"):
            AffineParams(1, 1, 1, 1).inverse()
        with pytest.raises(ValueError):
            warp_affine(np.ones((4, 4)), AffineParams(0, 0, 0, 0))

    def test_apply_about_centre(self):
        shape = (5, 5)
        p = AffineParams.from_geometry(180)
        assert np.allclose(apply_affine(p, [[2, 2], [0, 0]], shape), [[2, 2], [4, 4]])

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-10, 10), st.floats(0.9, 1.1), st.floats(-4, 4), st.floats(-4, 4))
    def test_compose_matches_sequential_points(self, ang, sc, tx, ty):
        a = AffineParams.from_geometry(ang, sc, (tx, ty))
        b = AffineParams.from_geometry(-ang / 2, 1 / sc, (ty, tx))
        pts = np.array([[0.0, 0.0], [3.0, 7.0]])
        direct = apply_affine(compose(a, b), pts, (8, 8))
        assert np.allclose(direct, apply_affine(a, apply_affine(b, pts, (8, 8)), (8, 8)))


class TestWarp:
    def test_identity_exact(self, texture):
        assert np.array_equal(warp_affine(texture, AffineParams()), texture)

    def test_integer_shift_and_zero_fill(self):
        img = np.arange(25.0).reshape(5, 5)
        out = warp_affine(img, AffineParams(tx=1, ty=0))
        assert np.array_equal(out[:, 1:], img[:, :-1]) and np.all(out[:, 0] == 0)

    def test_bilinear_half_pixel(self):
        img = np.array([[0.0, 2.0], [4.0, 6.0]])
        out = warp_affine(img, AffineParams(tx=-0.5, ty=-0.5))
        assert out[0, 0] == pytest.approx(3.0)

    def test_small_rotation_keeps_content(self, texture):
        rot = warp_affine(texture, AffineParams.from_geometry(2))
        back = warp_affine(rot, AffineParams.from_geometry(-2))
        inner = (slice(8, 56),) * 2
        assert pearson(back[inner], texture[inner]) > 0.99


class TestNmi:
    def test_self_is_two_and_symmetric(self, texture):
        assert nmi(texture, texture) == pytest.approx(2.0)
        other = np.roll(texture, 3, axis=0)
        assert nmi(texture, other) == pytest.approx(nmi(other, texture))

    def test_remapped_intensities(self, texture):
        # equal-width bins: affine remaps are exact, a smooth monotone one nearly so
        assert nmi(texture, -3 * texture + 7) == pytest.approx(2.0)
        assert 1.5 < nmi(texture, np.sqrt(texture + 1)) < 2.0

    def test_independent_noise_near_one(self):
        r = np.random.default_rng(0)
        assert nmi(r.standard_normal((256, 256)), r.standard_normal((256, 256)), 16) < 1.01

    def test_errors(self):
        with pytest.raises(ValueError):
            nmi(np.ones((4, 4)), np.arange(16.0).reshape(4, 4))
        with pytest.raises(ValueError):
            nmi(np.ones((4, 4)), np.ones((3, 3)))


class TestNelderMead:
    def test_quadratic_bowl(self):
        res = nelder_mead(lambda x: np.sum((x - [1, -2, 3]) ** 2), np.zeros(3))
        assert res.converged and res.fun < 1e-8
        assert np.allclose(res.x, [1, -2, 3], atol=1e-4)

    def test_rosenbrock(self):
        rosen = lambda x: (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2  # noqa: E731
        res = nelder_mead(rosen, np.array([-1.2, 1.0]), step=0.1)
        assert res.fun < 1e-8 and res.n_iter <= 2000
        assert np.all(np.diff(res.history) <= 0)

    def test_iteration_cap(self):
        res = nelder_mead(lambda x: np.sum(x ** 2), np.ones(4), SimplexConfig(max_iter=3))
        assert res.n_iter == 3 and not res.converged

    def test_non_finite_objective(self):
        with pytest.raises(FloatingPointError):
            nelder_mead(lambda x: np.nan, np.zeros(2))

    @pytest.mark.parametrize("bad", [dict(expansion=1.0), dict(contraction=1.5),
                                     dict(shrink=0), dict(max_iter=0)])
    def test_config_validation(self, bad):
        with pytest.raises(ValueError):
            SimplexConfig(**bad)

    @settings(max_examples=20, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=2, max_size=5))
    def test_history_never_increases(self, start):
        res = nelder_mead(lambda x: np.sum(np.abs(x)) + np.sin(3 * x).sum(), np.array(start),
                          SimplexConfig(max_iter=200))
        assert np.all(np.diff(res.history) <= 0)
        assert res.history[-1] == res.fun


class TestRegister:
    def test_identity(self, texture):
        rec = register(texture, texture)
        assert corner_error(rec, AffineParams(), texture.shape) < 0.05

    @pytest.mark.parametrize("shift", [(3, 0), (-3, 0), (0, 3), (0, -3)])
    def test_translation(self, texture, shift):
        planted = AffineParams(tx=shift[0], ty=shift[1])
        rec = register(warp_affine(texture, planted), texture)
        assert np.allclose(rec.translation, -np.array(shift), atol=0.2)

    def test_rotation_scale(self, texture):
        planted = AffineParams.from_geometry(2.5, 1.015, (1.5, -2))
        trace = []
        rec = register(warp_affine(texture, planted), texture, trace=trace)
        assert corner_error(rec, planted, texture.shape) < 0.5
        assert all(np.all(np.diff(t.history) <= 0) for t in trace)

    def test_shape_mismatch(self, texture):
        with pytest.raises(ValueError):
            register(texture, texture[:32, :32])

    def test_corner_error_of_exact_inverse(self):
        p = AffineParams.from_geometry(3, 1.02, (4, -1))
        assert corner_error(p.inverse(), p, (64, 64)) == pytest.approx(0, abs=1e-12)
        assert corner_error(AffineParams(), AffineParams(tx=1), (64, 64)) == pytest.approx(1)
