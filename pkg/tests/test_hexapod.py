"""Kinematics tests; hull-based stability checked against shapely."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import MultiPoint, Point

from hexcpg.controller import N_SERVOS, Position, PwmChannel, pwm_command
from hexcpg.hexapod import (
    SERVO_SPEED_DEG_S,
    HexapodWorld,
    LegGeometry,
    ServoState,
    geometry_from_dict,
    leg_fk,
    position_from_width,
    servo_step,
    stability_margin,
)

GEOM = LegGeometry()


def home_channels():
    return [PwmChannel() for _ in range(N_SERVOS)]


# -- servo slew -------------------------------------------------------------------


def test_servo_at_target_unchanged():
    s = ServoState(angle=10.0, target=10.0)
    assert servo_step(s, 0.1).angle == 10.0


def test_servo_speed_spec_sixty_degrees():
    s = ServoState(angle=0.0, target=60.0)
    assert servo_step(s, 0.12).angle == 60.0


def test_servo_half_way():
    s = ServoState(angle=0.0, target=60.0)
    assert servo_step(s, 0.06).angle == pytest.approx(30.0)


def test_servo_negative_direction():
    s = ServoState(angle=20.0, target=-40.0)
    assert servo_step(s, 0.06).angle == pytest.approx(-10.0)


def test_servo_rejects_bad_dt():
    with pytest.raises(ValueError):
        servo_step(ServoState(angle=0.0, target=1.0), 0.0)


@given(
    angle=st.floats(min_value=-45, max_value=45),
    target=st.floats(min_value=-45, max_value=45),
    dt=st.floats(min_value=1e-3, max_value=0.5),
)
@settings(max_examples=80, deadline=None)
def test_servo_slew_bound(angle, target, dt):
    s = ServoState(angle=angle, target=target)
    moved = servo_step(s, dt)
    assert abs(moved.angle - angle) <= SERVO_SPEED_DEG_S * dt + 1e-6


def test_servo_speed_constant_is_500():
    assert SERVO_SPEED_DEG_S == pytest.approx(500.0)


# -- forward kinematics --------------------------------------------------------------


def test_home_stance_point_below_coxa_tip():
    # Front-right mount is (4.5, -4.45); the stance foot hangs coxa_len
    # further out and femur_len down.
    x, y, z = leg_fk(0.0, 0.0, 0, GEOM)
    assert (x, y, z) == pytest.approx((4.5, -4.45 - GEOM.coxa_len, -GEOM.femur_len))


def test_left_right_mirror_symmetry():
    right = leg_fk(10.0, 0.0, 0, GEOM)  # FR
    left = leg_fk(10.0, 0.0, 3, GEOM)   # FL
    assert right[0] == pytest.approx(left[0])
    assert right[1] == pytest.approx(-left[1])


def test_coxa_swing_chord_displacement():
    for leg in range(6):
        home = leg_fk(0.0, 0.0, leg, GEOM)
        swung = leg_fk(20.0, 0.0, leg, GEOM)
        moved = math.hypot(swung[0] - home[0], swung[1] - home[1])
        chord = 2.0 * GEOM.coxa_len * math.sin(math.radians(10.0))
        assert moved == pytest.approx(chord)
        assert swung[0] > home[0]  # positive coxa swings forward on both sides


def test_femur_lift_raises_foot():
    down = leg_fk(0.0, 0.0, 1, GEOM)
    up = leg_fk(0.0, GEOM.femur_lift, 1, GEOM)
    assert up[2] > down[2]


def test_fk_continuity():
    prev = leg_fk(0.0, 0.0, 2, GEOM)
    for i in range(1, 101):
        cur = leg_fk(i * 0.2, 0.0, 2, GEOM)
        step = math.dist(prev, cur)
        assert step < 0.05
        prev = cur


# -- stability --------------------------------------------------------------------------


def shapely_margin(points):
    """Independent oracle: signed distance to the convex hull boundary."""
    hull = MultiPoint([tuple(p) for p in points]).convex_hull
    dist = hull.exterior.distance(Point(0, 0)) if hull.geom_type == "Polygon" \
        else hull.distance(Point(0, 0))
    if hull.geom_type == "Polygon" and hull.contains(Point(0, 0)):
        return dist
    return -dist


@pytest.mark.parametrize("seed", range(12))
def test_stability_matches_shapely(seed):
    rng = random.Random(seed)
    points = [(rng.uniform(-8, 8), rng.uniform(-8, 8)) for _ in range(rng.randint(3, 6))]
    report = stability_margin(points)
    assert report.margin == pytest.approx(shapely_margin(points), abs=1e-9)


def test_six_foot_stance_margin_positive_and_maximal():
    world = HexapodWorld()
    full = world.stability()
    assert full.n_contacts == 6
    assert full.margin > 0
    # lifting legs can only shrink the margin
    tripod = [world.foot(leg)[:2] for leg in (1, 3, 5)]
    assert stability_margin(tripod).margin <= full.margin


def test_tripod_stance_margin_positive():
    world = HexapodWorld()
    for legs in ((0, 4, 2), (1, 3, 5)):
        points = [world.foot(leg)[:2] for leg in legs]
        report = stability_margin(points)
        assert report.margin > 0
        assert report.margin == pytest.approx(shapely_margin(points), abs=1e-9)


def test_degenerate_contacts_margin_nonpositive():
    assert stability_margin([]).margin is None
    assert stability_margin([(3.0, 4.0)]).margin == pytest.approx(-5.0)
    two = stability_margin([(1.0, 1.0), (2.0, 2.0)])
    assert two.margin == pytest.approx(-math.sqrt(2))
    collinear = stability_margin([(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)])
    assert collinear.margin <= 0


# -- PWM target mapping --------------------------------------------------------------------


def test_position_from_width_exact_and_nearest():
    ch = PwmChannel()
    assert position_from_width(ch) is Position.HOME
    assert position_from_width(pwm_command(ch, True, False)) is Position.FW
    odd = PwmChannel(latched_width=1040)
    with pytest.warns(UserWarning):
        assert position_from_width(odd) is Position.FW


def test_apply_pwm_targets_home_and_fw():
    world = HexapodWorld()
    channels = home_channels()
    world.apply_pwm_targets(channels)
    assert all(s.target == s.angle for s in world.servos)
    channels[0] = pwm_command(channels[0], fw=True, bw=False)  # CFR forward
    world.apply_pwm_targets(channels)
    assert world.servos[0].target == GEOM.coxa_home + GEOM.coxa_swing


def test_apply_pwm_targets_wrong_count():
    with pytest.raises(ValueError):
        HexapodWorld().apply_pwm_targets([PwmChannel()])


# -- world stepping ----------------------------------------------------------------------


def test_world_idle_no_displacement():
    world = HexapodWorld()
    for _ in range(10):
        world.step(home_channels(), 0.1)
    assert world.body_x == 0.0
    assert world.t_sim_ms == 10.0
    assert world.t_wall_ms == pytest.approx(1000.0)


def test_contact_flips_at_stance_threshold():
    world = HexapodWorld()
    channels = home_channels()
    channels[1] = pwm_command(channels[1], fw=True, bw=False)  # lift FR femur
    world.step(channels, 0.2)
    assert world.contacts == [False, True, True, True, True, True]
    channels[1] = pwm_command(channels[1], fw=False, bw=True)  # lower it
    world.step(channels, 0.2)
    assert all(world.contacts)


def test_stance_stroke_advances_body():
    # Put CFR at forward swing with the foot down, then command backward:
    # the single stroking leg contributes chord/6 to the body.
    world = HexapodWorld()
    channels = home_channels()
    channels[0] = pwm_command(channels[0], fw=True, bw=False)
    world.step(channels, 0.2)  # swings while grounded (drag) - may move body back
    world.body_x = 0.0
    channels[0] = pwm_command(channels[0], fw=False, bw=True)
    world.step(channels, 0.2)
    chord = 2.0 * GEOM.coxa_len * math.sin(math.radians(GEOM.coxa_swing))
    assert world.body_x == pytest.approx(chord / 6.0)


def test_snapshot_shape():
    world = HexapodWorld()
    snap = world.snapshot()
    assert set(snap) >= {
        "t_sim_ms", "t_wall_ms", "body_xy", "servo_angles",
        "contacts", "stability_margin", "feet_xy", "support",
    }
    assert len(snap["servo_angles"]) == 12
    assert len(snap["contacts"]) == 6
    assert snap["stability_margin"] > 0


def test_geometry_from_dict():
    geom = geometry_from_dict({"coxa_len": 3.0, "coxa_swing": 20.0})
    assert geom.coxa_len == 3.0 and geom.coxa_swing == 20.0
    with pytest.raises(ValueError):
        geometry_from_dict({"coxa_size": 1.0})
