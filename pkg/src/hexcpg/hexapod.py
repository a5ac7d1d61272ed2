"""Kinematic hexapod: slew-limited servos, 2-DOF legs, static stability.

Purely kinematic crawl model: no mass, friction or slip. The coxa
swings the leg in the horizontal plane (at stance the foot sits
directly below the coxa tip, so horizontal coxa displacement is
coxa_len x chord); the femur pitches the foot vertically and decides
ground contact. Body motion is the average retraction of the feet that
stayed in stance across a step.

Angles are degrees, lengths centimetres, dt wall-clock seconds (servo
slew is a wall-time property of the hardware).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .controller import N_SERVOS, Position, PwmChannel

N_LEGS = 6

#: Theoretical servo speed: 60 degrees per 0.12 s.
SERVO_SPEED_DEG_S = 60.0 / 0.12

_REACH_EPS = 1e-9


@dataclass(frozen=True)
class LegGeometry:
    """Link lengths, mount points and calibrated joint angles.

    The frame is 9.0 cm deep (x, forward) by 8.9 cm wide (y, left).
    Coxa angles are relative to the outward mount normal, positive
    toward the front on both sides. Femur 0 is stance (foot straight
    down); positive lifts the foot.
    """

    coxa_len: float = 2.5
    femur_len: float = 4.5
    body_depth: float = 9.0
    body_width: float = 8.9
    # Calibrated positions. The coxa swing default is tuned so the run
    # gait covers ~1.3 cm per cycle (see the speed tests).
    coxa_swing: float = 15.0       # fw = +swing, bw = -swing about home
    coxa_home: float = 0.0
    coxa_limits: tuple[float, float] = (-45.0, 45.0)
    femur_lift: float = 25.0       # fw = lift; bw = home = stance
    femur_home: float = 0.0
    femur_limits: tuple[float, float] = (-10.0, 60.0)
    stance_threshold: float = 5.0  # femur within this of bw counts as contact

    def mount(self, leg: int) -> tuple[float, float]:
        """Leg root on the body outline: 0=FR 1=MR 2=BR 3=FL 4=ML 5=BL."""
        xs = (self.body_depth / 2, 0.0, -self.body_depth / 2)
        x = xs[leg % 3]
        y = -self.body_width / 2 if leg < 3 else self.body_width / 2
        return x, y

    def is_coxa(self, servo: int) -> bool:
        return servo % 2 == 0

    def leg_of_servo(self, servo: int) -> int:
        return servo // 2

    def calibrated_angle(self, servo: int, position: Position) -> float:
        if self.is_coxa(servo):
            offsets = {
                Position.FW: self.coxa_swing,
                Position.BW: -self.coxa_swing,
                Position.HOME: 0.0,
            }
            return self.coxa_home + offsets[position]
        offsets = {
            Position.FW: self.femur_lift,
            Position.BW: 0.0,
            Position.HOME: 0.0,
        }
        return self.femur_home + offsets[position]

    def limits(self, servo: int) -> tuple[float, float]:
        return self.coxa_limits if self.is_coxa(servo) else self.femur_limits


@dataclass(frozen=True)
class ServoState:
    angle: float
    target: float
    limits: tuple[float, float] = (-90.0, 90.0)
    speed_limit: float = SERVO_SPEED_DEG_S  # deg/s


def servo_step(s: ServoState, dt: float) -> ServoState:
    """Move toward the target at the slew limit; snap when within reach."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    max_step = s.speed_limit * dt
    delta = s.target - s.angle
    if abs(delta) <= max_step + _REACH_EPS:
        angle = s.target
    else:
        angle = s.angle + math.copysign(max_step, delta)
    angle = min(max(angle, s.limits[0]), s.limits[1])
    return replace(s, angle=angle)


def leg_fk(
    coxa_deg: float, femur_deg: float, leg: int, geom: LegGeometry
) -> tuple[float, float, float]:
    """Foot point in the body frame (cm).

    Coxa rotates about the vertical axis at the mount; the femur hangs
    from the coxa tip and pitches the foot up/out as it lifts.
    """
    mx, my = geom.mount(leg)
    base = -math.pi / 2 if leg < 3 else math.pi / 2
    mirror = 1.0 if leg < 3 else -1.0
    psi = base + mirror * math.radians(coxa_deg)
    femur = math.radians(femur_deg)
    reach = geom.coxa_len + geom.femur_len * math.sin(femur)
    return (
        mx + reach * math.cos(psi),
        my + reach * math.sin(psi),
        -geom.femur_len * math.cos(femur),
    )


@dataclass(frozen=True)
class StabilityReport:
    """Support polygon and the signed margin of the body-centre projection."""

    support: tuple[tuple[float, float], ...]
    margin: Optional[float]
    n_contacts: int


def _distance_to_segment(p, a, b) -> float:
    ap = (p[0] - a[0], p[1] - a[1])
    ab = (b[0] - a[0], b[1] - a[1])
    denom = ab[0] * ab[0] + ab[1] * ab[1]
    t = 0.0 if denom == 0 else max(0.0, min(1.0, (ap[0] * ab[0] + ap[1] * ab[1]) / denom))
    dx, dy = p[0] - (a[0] + t * ab[0]), p[1] - (a[1] + t * ab[1])
    return math.hypot(dx, dy)


def stability_margin(contact_points: Sequence[tuple[float, float]]) -> StabilityReport:
    """Signed distance from the origin to the support polygon boundary.

    Positive inside the polygon. Fewer than three (or collinear)
    contacts have no interior: the margin is minus the distance to the
    degenerate hull, hence <= 0.
    """
    points = [tuple(p) for p in contact_points]
    if not points:
        return StabilityReport(support=(), margin=None, n_contacts=0)
    if len(points) >= 3:
        try:
            hull = ConvexHull(np.asarray(points, dtype=float))
        except QhullError:
            hull = None
        if hull is not None:
            # equations rows (a, b, c): a*x + b*y + c <= 0 inside.
            margin = float(np.min(-hull.equations[:, 2]))
            support = tuple(points[i] for i in hull.vertices)
            return StabilityReport(support=support, margin=margin, n_contacts=len(points))
    origin = (0.0, 0.0)
    if len(points) == 1:
        dist = math.hypot(*points[0])
    else:
        dist = min(
            _distance_to_segment(origin, a, b)
            for i, a in enumerate(points)
            for b in points[i + 1 :]
        )
    return StabilityReport(support=tuple(points), margin=-dist, n_contacts=len(points))


def position_from_width(ch: PwmChannel) -> Position:
    """Nearest calibrated position for the channel's latched pulse width."""
    widths = {
        Position.FW: ch.width_fw,
        Position.BW: ch.width_bw,
        Position.HOME: ch.width_home,
    }
    for pos, width in widths.items():
        if ch.latched_width == width:
            return pos
    nearest = min(widths, key=lambda p: abs(widths[p] - ch.latched_width))
    warnings.warn(
        f"pulse width {ch.latched_width} us matches no calibrated position; "
        f"using nearest ({nearest.value})",
        stacklevel=2,
    )
    return nearest


class HexapodWorld:
    """Mutable world state; step once per simulation tick."""

    def __init__(self, geom: Optional[LegGeometry] = None):
        self.geom = geom or LegGeometry()
        self.servos: list[ServoState] = []
        for servo in range(N_SERVOS):
            home = self.geom.calibrated_angle(servo, Position.HOME)
            self.servos.append(
                ServoState(angle=home, target=home, limits=self.geom.limits(servo))
            )
        self.body_x = 0.0
        self.body_y = 0.0
        self.t_sim_ms = 0.0
        self.t_wall_ms = 0.0
        self.contacts = self._contacts()

    # -- derived state ----------------------------------------------------

    def foot(self, leg: int) -> tuple[float, float, float]:
        return leg_fk(self.servos[2 * leg].angle, self.servos[2 * leg + 1].angle,
                      leg, self.geom)

    def feet(self) -> list[tuple[float, float, float]]:
        return [self.foot(leg) for leg in range(N_LEGS)]

    def _contacts(self) -> list[bool]:
        bw = self.geom.femur_home  # stance angle
        thresh = self.geom.stance_threshold
        return [self.servos[2 * leg + 1].angle <= bw + thresh for leg in range(N_LEGS)]

    def stability(self) -> StabilityReport:
        points = [
            (f[0], f[1]) for f, c in zip(self.feet(), self.contacts) if c
        ]
        return stability_margin(points)

    # -- stepping ---------------------------------------------------------

    def apply_pwm_targets(self, channels: Sequence[PwmChannel]) -> None:
        if len(channels) != N_SERVOS:
            raise ValueError(f"expected {N_SERVOS} channels, got {len(channels)}")
        for servo, ch in enumerate(channels):
            target = self.geom.calibrated_angle(servo, position_from_width(ch))
            self.servos[servo] = replace(self.servos[servo], target=target)

    def step(self, channels: Sequence[PwmChannel], dt: float, sim_ms: float = 1.0) -> None:
        """Apply targets, slew servos for dt wall seconds, advance the body.

        The body moves by the mean backward displacement of the feet
        that were in stance both before and after the step.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.apply_pwm_targets(channels)
        feet_before = self.feet()
        contacts_before = self.contacts
        self.servos = [servo_step(s, dt) for s in self.servos]
        feet_after = self.feet()
        self.contacts = self._contacts()

        deltas = [
            feet_before[leg][0] - feet_after[leg][0]
            for leg in range(N_LEGS)
            if contacts_before[leg] and self.contacts[leg]
        ]
        if deltas:
            self.body_x += sum(deltas) / len(deltas)
        self.t_sim_ms += sim_ms
        self.t_wall_ms += dt * 1000.0

    def snapshot(self) -> dict:
        report = self.stability()
        return {
            "t_sim_ms": self.t_sim_ms,
            "t_wall_ms": self.t_wall_ms,
            "body_xy": [self.body_x, self.body_y],
            "servo_angles": [s.angle for s in self.servos],
            "contacts": list(self.contacts),
            "stability_margin": report.margin,
            "feet_xy": [[f[0], f[1]] for f in self.feet()],
            "support": [list(p) for p in report.support],
        }


def geometry_from_dict(data: dict) -> LegGeometry:
    known = {
        "coxa_len", "femur_len", "body_depth", "body_width",
        "coxa_swing", "coxa_home", "femur_lift", "femur_home",
        "stance_threshold",
    }
    kwargs = {k: float(v) for k, v in data.items() if k in known}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown hexapod geometry keys: {sorted(unknown)}")
    return LegGeometry(**kwargs)
