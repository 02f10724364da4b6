import numpy as np
import pytest

from dnaclab import disturbances as D
from dnaclab.disturbances import SlungMass, WallEffect, WindField, compose
from dnaclab.nn_core import ConfigurationError
from dnaclab.experiments import load_scenario


def at(position, velocity=(0.0, 0.0, 0.0), attitude=(0.0, 0.0, 0.0)):
    s = np.zeros(12)
    s[0:3], s[3:6], s[6:9] = position, velocity, attitude
    return s


def test_crosswind_constant():
    assert D.CROSSWIND_SPEED == pytest.approx(8.04672, abs=1e-12)


def test_wind_on_axis_hand_value():
    wind = WindField(source=(0.0, -2.0, 1.0), direction=(0.0, 1.0, 0.0), core_speed=8.05,
                     decay_length=4.0, drag=0.3)
    force, torque = wind.wrench(at((0.0, 0.0, 1.0)), t=10.0)
    assert np.linalg.norm(force) == pytest.approx(0.3 * 8.05 * np.exp(-2.0 / 4.0), rel=1e-14)
    np.testing.assert_allclose(force[[0, 2]], 0.0, atol=1e-15)
    # centre of pressure above the centre of mass: +y push rolls the vehicle negative
    assert torque[0] == pytest.approx(-0.02 * force[1], rel=1e-14)


def test_wind_outside_cone_is_zero():
    wind = WindField()
    for p in [(5.0, -1.0, 1.0), (0.0, -3.0, 1.0), (-4.0, 0.0, 1.0)]:
        force, torque = wind.wrench(at(p), t=10.0)
        assert not force.any() and not torque.any()


def test_wind_force_along_relative_flow():
    wind = WindField()
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-1.5, 2.0), 1.0])
        v = rng.normal(size=3)
        force, _ = wind.wrench(at(p, v), t=10.0)
        rel = wind.velocity_at(p, 10.0) - v
        if np.linalg.norm(force) > 0:
            cos = force @ rel / (np.linalg.norm(force) * np.linalg.norm(rel))
            assert cos == pytest.approx(1.0, abs=1e-12)


def test_wind_ramp():
    wind = WindField(onset_ramp=2.0)
    f0, _ = wind.wrench(at((0.0, 0.0, 1.0)), t=0.0)
    f1, _ = wind.wrench(at((0.0, 0.0, 1.0)), t=1.0)
    f2, _ = wind.wrench(at((0.0, 0.0, 1.0)), t=5.0)
    assert not f0.any()
    # ramp scales both the stream and the immersion
    assert np.linalg.norm(f1) == pytest.approx(0.25 * np.linalg.norm(f2), rel=1e-12)


def test_wind_validation():
    with pytest.raises(ConfigurationError):
        WindField(direction=(0.0, 0.0, 0.0))
    with pytest.raises(ConfigurationError):
        WindField(cone_half_angle=2.0)


WALL = [[[-1.0, 0.0], [1.0, 0.0]]]


def test_wall_beyond_influence_is_zero_and_decays():
    wall = WallEffect(walls=WALL, influence_distance=1.0, seed=2)
    for _ in range(100):
        wall.wrench(at((0.0, 0.2, 1.0)), dt=1e-3)
    before = np.abs(wall.noise).copy()
    assert before.any()
    _, tq = wall.wrench(at((0.0, 1.5, 1.0)), dt=1e-3)
    assert not tq.any()
    np.testing.assert_allclose(np.abs(wall.noise), before * np.exp(-1e-3 / 0.1), rtol=1e-14)


def test_wall_contact_std():
    wall = WallEffect(walls=WALL, contact_std=0.1, correlation_time=0.01, seed=4)
    s = at((0.0, 0.0, 1.0))
    out = np.array([wall.wrench(s, dt=1e-3)[1][:2] for _ in range(100_000)])
    assert abs(out[:, 0].std() - 0.1) < 0.01
    assert abs(out[:, 1].std() - 0.1) < 0.01


def test_wall_scaling_with_distance():
    a = WallEffect(walls=WALL, seed=5)
    b = WallEffect(walls=WALL, seed=5)
    for _ in range(20):
        ta = a.wrench(at((0.0, 0.0, 1.0)), dt=1e-3)[1]
        tb = b.wrench(at((0.0, 0.25, 1.0)), dt=1e-3)[1]
        np.testing.assert_allclose(tb, 0.75 * ta, rtol=1e-12)


def test_wall_determinism():
    seqs = []
    for _ in range(2):
        wall = WallEffect(walls=WALL, seed=9)
        seqs.append([wall.wrench(at((0.1 * k % 1.0, 0.3, 1.0)), dt=1e-3)[1] for k in range(200)])
    np.testing.assert_array_equal(seqs[0], seqs[1])


def test_segment_distance():
    a, b = np.array([0.0, 0.0]), np.array([2.0, 0.0])
    assert D.segment_distance(np.array([1.0, 3.0]), a, b) == 3.0
    assert D.segment_distance(np.array([5.0, 4.0]), a, b) == 5.0
    assert D.segment_distance(np.array([1.0, 1.0]), a, a) == pytest.approx(np.sqrt(2.0))


def test_slung_zero_mass():
    sm = SlungMass(mass=0.0, water_mass=0.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        f, tq = sm.wrench(at(rng.normal(size=3), rng.normal(size=3)), dt=1e-3, accel=rng.normal(size=3))
        assert not f.any() and not tq.any()


def test_slung_static_hover():
    sm = SlungMass(slosh_std=0.0)
    f, tq = sm.wrench(at((0.0, 0.0, 1.0)), dt=1e-3, accel=np.zeros(3))
    weight = 0.165 * 9.81
    np.testing.assert_allclose(f, [0.0, 0.0, -weight], atol=1e-15)
    o = np.array([0.177, 0.177, -0.02])
    hand = np.array([o[1] * -weight, -o[0] * -weight, 0.0])
    np.testing.assert_allclose(tq, hand, atol=1e-15)
    np.testing.assert_allclose(tq, np.cross(o, f), atol=1e-15)


def test_slung_torque_is_offset_cross_body_force():
    sm = SlungMass()
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = at(np.zeros(3), attitude=rng.uniform(-0.3, 0.3, 3))
        f, tq = sm.wrench(s, dt=1e-3, accel=rng.normal(size=3))
        r = D.kernels.rotation_matrix(*s[6:9])
        np.testing.assert_allclose(tq, np.cross(sm.offset, r.T @ f), atol=1e-14)


def test_slung_pendulum_dissipates():
    sm = SlungMass(pendulum_damping=0.3, slosh_std=0.0, coupling=0.0)
    sm.z[0], sm.z[1] = 0.3, -0.2
    s = at((0.0, 0.0, 1.0))
    prev = sm.pendulum_energy()
    for _ in range(3000):
        sm.wrench(s, dt=1e-3, accel=np.zeros(3))
        e = sm.pendulum_energy()
        assert e <= prev + 1e-15
        prev = e
    assert prev < 0.1 * SlungMass(slosh_std=0.0).length * 9.81


def test_slung_determinism_and_validation():
    out = []
    for _ in range(2):
        sm = SlungMass(seed=3)
        out.append([sm.wrench(at(np.zeros(3)), dt=1e-3)[0] for _ in range(100)])
    np.testing.assert_array_equal(out[0], out[1])
    with pytest.raises(ConfigurationError):
        SlungMass(slosh_damping=1.5)
    with pytest.raises(ConfigurationError):
        SlungMass(mass=0.1, water_mass=0.2)


def test_compose():
    zero = compose([])
    assert not zero[0].any() and not zero[1].any()
    w = (np.array([1.0, 2.0, 3.0]), np.array([0.1, 0.2, 0.3]))
    f, tq = compose([w])
    np.testing.assert_array_equal(f, w[0])
    np.testing.assert_array_equal(tq, w[1])
    f, tq = compose([w, (np.array([-1.0, 0.5, 0.0]), np.array([0.0, 0.0, 1.0]))])
    np.testing.assert_array_equal(f, [0.0, 2.5, 3.0])
    np.testing.assert_array_equal(tq, [0.1, 0.2, 1.3])


def test_round_trip_and_unknown_type():
    for d in (WindField(), WallEffect(walls=WALL), SlungMass()):
        doc = D.to_dict(d)
        assert D.to_dict(D.from_dict(doc)) == doc
    with pytest.raises(ConfigurationError):
        D.from_dict({"type": "tornado"})
    with pytest.raises(ConfigurationError):
        D.from_dict({"type": "wind", "gusts": 3})


def _grid_magnitudes(cfg, xs, ys):
    wind = next(d for d in cfg.disturbances if isinstance(d, WindField))
    walls = next(d for d in cfg.disturbances if isinstance(d, WallEffect))
    w = np.array([[np.linalg.norm(wind.wrench(at((x, y, 1.0)), t=10.0)[0]) for x in xs] for y in ys])
    d = np.array([[walls.distance((x, y)) for x in xs] for y in ys])
    return w, d < walls.influence_distance


def test_experiment2_field_is_localized():
    cfg = load_scenario("exp2_rose")
    xs = np.linspace(-3.0, 3.0, 25)
    ys = np.linspace(-3.0, 3.0, 25)
    wind, near_wall = _grid_magnitudes(cfg, xs, ys)
    left = xs < -0.5
    right = xs > 0.5
    assert wind[:, left].max() == 0.0
    assert wind[:, right].max() > 0.0
    assert near_wall[:, left].any() and not near_wall[:, right].any()
