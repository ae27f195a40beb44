"""Parameter manifold: initialization, projection, retraction, snapshots."""

import math

import numpy as np
import pytest

from mfpoisson.params import (
    ParamPoint,
    ParticleCloud,
    b_half_width,
    in_ball,
    init_cloud,
    retract,
    retract_cloud,
    tangent_project,
    tangent_project_cloud,
)


def test_init_cloud_hypothesis_support():
    cloud = init_cloud(50, 1, seed=3)
    assert np.all(cloud.a == 0.0)
    assert np.all(cloud.c == 0.0)
    assert set(np.unique(cloud.w)) <= {-1.0, 1.0}
    assert np.all(np.abs(cloud.b) <= 3.0)
    cloud.validate()


def test_init_cloud_deterministic():
    a = init_cloud(20, 3, seed=11)
    b = init_cloud(20, 3, seed=11)
    assert np.array_equal(a.w, b.w)
    assert np.array_equal(a.b, b.b)
    c = init_cloud(20, 3, seed=12)
    assert not np.array_equal(a.b, c.b)


def test_init_cloud_b_moments():
    m, d = 100_000, 4
    cloud = init_cloud(m, d, seed=0)
    half = b_half_width(d)
    sigma = half / math.sqrt(3.0)
    assert abs(cloud.b.mean()) < 3.0 * sigma / math.sqrt(m)
    norms = np.linalg.norm(cloud.w, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-12


def test_init_cloud_rejects_bad_sizes():
    with pytest.raises(ValueError):
        init_cloud(0, 1, seed=0)
    with pytest.raises(ValueError):
        init_cloud(1, 0, seed=0)


def _point(d=2, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    return ParamPoint(c=rng.standard_normal(), a=rng.standard_normal(),
                      w=w, b=rng.uniform(-1, 1))


def test_tangent_project_kills_radial_component():
    p = _point()
    g = np.zeros(5)
    g[2:-1] = 3.0 * p.w
    out = tangent_project(p, g)
    np.testing.assert_allclose(out[2:-1], 0.0, atol=1e-14)


def test_tangent_project_keeps_orthogonal_component():
    p = ParamPoint(0.0, 0.0, np.array([1.0, 0.0]), 0.0)
    g = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    out = tangent_project(p, g)
    np.testing.assert_allclose(out, [1.0, 2.0, 0.0, 4.0, 5.0], atol=1e-15)


def test_tangent_project_idempotent_and_self_adjoint():
    rng = np.random.default_rng(5)
    for seed in range(10):
        p = _point(4, seed)
        g = rng.standard_normal(7)
        h = rng.standard_normal(7)
        pg = tangent_project(p, g)
        assert np.max(np.abs(tangent_project(p, pg) - pg)) < 1e-14
        assert abs(pg[2:-1] @ p.w) < 1e-12
        assert tangent_project(p, g) @ h == pytest.approx(
            g @ tangent_project(p, h), abs=1e-12)


def test_retract_identity_at_zero_step():
    p = _point(3, 2)
    delta = np.arange(6, dtype=float)
    out = retract(p, delta, 0.0)
    assert out.c == p.c and out.a == p.a and out.b == p.b
    assert np.array_equal(out.w, p.w)


def test_retract_normalizes_w():
    p = ParamPoint(0.0, 0.0, np.array([1.0, 0.0]), 0.0)
    delta = np.array([0.0, 0.0, 0.0, 1.0, 0.0])
    for t in (0.1, 1.0, 7.0):
        out = retract(p, delta, t)
        np.testing.assert_allclose(out.w, [1.0 / math.sqrt(1 + t * t),
                                           t / math.sqrt(1 + t * t)])


def test_retract_clamps_b():
    d = 2
    half = b_half_width(d)
    p = ParamPoint(0.0, 0.0, np.array([0.0, 1.0]), half)
    delta = np.zeros(d + 3)
    delta[-1] = 5.0
    assert retract(p, delta, 1.0).b == half
    delta[-1] = -0.5
    assert retract(p, delta, 1.0).b == pytest.approx(half - 0.5)


def test_retract_degenerate_step_rejected():
    p = ParamPoint(0.0, 0.0, np.array([1.0, 0.0]), 0.0)
    delta = np.array([0.0, 0.0, -1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        retract(p, delta, 1.0)


def test_retract_cloud_matches_pointwise_retract():
    rng = np.random.default_rng(8)
    cloud = init_cloud(12, 3, seed=4)
    cloud.a = rng.standard_normal(12)
    deltas = rng.standard_normal((12, 6))
    stepped = retract_cloud(cloud, deltas, 0.03)
    for i in (0, 5, 11):
        single = retract(cloud.particle(i), deltas[i], 0.03)
        assert stepped.c[i] == pytest.approx(single.c)
        np.testing.assert_allclose(stepped.w[i], single.w, atol=1e-15)
        assert stepped.b[i] == pytest.approx(single.b)


def test_invariants_after_many_retractions():
    rng = np.random.default_rng(21)
    cloud = init_cloud(30, 4, seed=9)
    for _ in range(200):
        deltas = rng.standard_normal((30, 7))
        cloud = retract_cloud(cloud, deltas, 0.05)
    cloud.validate()
    assert np.max(np.abs(np.linalg.norm(cloud.w, axis=1) - 1.0)) <= 1e-12


def test_in_ball():
    w = np.array([1.0])
    assert in_ball(ParamPoint(0.0, 0.0, w, 0.0), 1.0)
    assert not in_ball(ParamPoint(3.0, 0.0, w, 0.0), 1.0)
    assert in_ball(ParamPoint(0.0, 4.0, w, 0.0), 1.0)
    assert not in_ball(ParamPoint(0.0, 4.0001, w, 0.0), 1.0)
    with pytest.raises(ValueError):
        in_ball(ParamPoint(0.0, 0.0, w, 0.0), 0.0)


def test_param_point_validation():
    with pytest.raises(ValueError):
        ParamPoint(0.0, 0.0, np.array([1.0, 1.0]), 0.0).validate()
    with pytest.raises(ValueError):
        ParamPoint(0.0, 0.0, np.array([1.0, 0.0]), 99.0).validate()


def test_ambient_roundtrip():
    p = _point(3, 13)
    q = ParamPoint.from_ambient(p.ambient())
    assert q.c == p.c and q.a == p.a and q.b == p.b
    assert np.array_equal(q.w, p.w)


def test_snapshot_roundtrip_bit_exact(tmp_path):
    cloud = init_cloud(17, 3, seed=77, tau=6.5)
    rng = np.random.default_rng(0)
    cloud.c = rng.standard_normal(17)
    cloud.a = rng.standard_normal(17) * 1e-7
    path = tmp_path / "cloud.snap"
    cloud.save(path)
    loaded = ParticleCloud.load(path)
    assert loaded.dim == 3 and loaded.m == 17 and loaded.tau == 6.5
    assert np.array_equal(loaded.c, cloud.c)
    assert np.array_equal(loaded.a, cloud.a)
    assert np.array_equal(loaded.w, cloud.w)
    assert np.array_equal(loaded.b, cloud.b)


def test_snapshot_rejects_malformed(tmp_path):
    path = tmp_path / "bad.snap"
    path.write_text("1 2\n")
    with pytest.raises(ValueError):
        ParticleCloud.load(path)


def test_cloud_from_particles():
    pts = [_point(2, s) for s in range(4)]
    cloud = ParticleCloud.from_particles(pts, tau=4.0)
    assert cloud.m == 4
    assert cloud.particle(2).b == pts[2].b
