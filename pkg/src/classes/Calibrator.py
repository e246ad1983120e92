"""Geometric calibration: cursor offset, key corners and the keyboard pose rule.

Every measurement is a spatial search driven only by reticle observations. A
guess is accepted when the reticle stops moving under a test motion that would
move it for any other guess.
"""

from __future__ import annotations

import math
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import bisect, root

from ..utils.errors import DegeneratePoses, NoConvergence
from ..utils.geometry_utils import RigidFit, fit_rigid_transform
from ..utils.logger import setup_logger, should_log_progress
from .CalibrationReport import CalibrationReport, transform_to_dict
from .CursorOffset import CursorOffset
from .FieldCorrelator import FieldCorrelator
from .KeyboardModel import KeyboardModel, player_pose
from .LabConfig import LabConfig
from .Quad import Quad
from .ReticleOracle import KeyboardView, Point2, ReticleOracle
from .RoomSimulator import DEFAULT_BACKGROUND, RoomConfig, run_session, session_echo
from .ScriptedReplay import default_isolation_sweeps, scripted_replay
from .Transform import FORWARD, RIGHT, UP, Transform, UnitQuat, Vec3, compose, inverse

logger = setup_logger(__name__)

RETICLE_EPSILON = 1e-4
MAX_ROUNDS = 10
INITIAL_XTOL = 1e-6

TRANSLATION_STEP = 0.5
ANGLE_BRACKET = math.radians(45.0)
POSITION_BRACKET = 0.5

HAND_POSITION = Vec3(0.0, -0.30, -0.10)
ROUGH_KEYBOARD_POINT = Vec3(0.0, -0.25, -0.45)
AIM_TOLERANCE = 1e-7
CONE_ANGLE = math.radians(5.0)
CONE_NEAR = 0.05
CONE_FAR = 3.0
CONE_XTOL = 1e-7

# (x, y, z, yaw, pitch) of the head at each keyboard measurement; the last is held out
CALIBRATION_HEADS = (
    (0.0, 1.6, 0.0, 0.0, -20.0),
    (0.5, 1.55, -0.3, 30.0, -15.0),
    (-0.4, 1.7, 0.6, -50.0, -25.0),
    (1.2, 1.6, -1.0, 120.0, -10.0),
)

Reticle = Callable[[Transform], Optional[Point2]]


def head_pose(x: float, y: float, z: float, yaw_deg: float, pitch_deg: float) -> Transform:
    rotation = UnitQuat.from_axis_angle(UP, math.radians(yaw_deg)) * UnitQuat.from_axis_angle(
        RIGHT, math.radians(pitch_deg)
    )
    return Transform(Vec3(x, y, z), rotation.normalized())


def _observe(reticle: Reticle, hand: Transform, controller_to_hand: Transform) -> NDArray[np.float64]:
    seen = reticle(compose(hand, inverse(controller_to_hand)))
    if seen is None:
        raise NoConvergence(f"Reticle left the surface with the hand at {hand.position.as_tuple()}")
    return np.array(seen, dtype=np.float64)


def _bisect(f: Callable[[float], float], lo: float, hi: float, xtol: float, name: str) -> tuple[float, int]:
    try:
        x, result = bisect(f, lo, hi, xtol=xtol, full_output=True)
    except ValueError as e:
        raise NoConvergence(f"Search for {name} lost its bracket [{lo}, {hi}]: {e}") from None
    return float(x), int(result.iterations)


def _cross2(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _direction(alpha: float, beta: float) -> Vec3:
    """Forward rotated by pitch beta about x, then yaw alpha about y."""
    q = UnitQuat.from_axis_angle(UP, alpha) * UnitQuat.from_axis_angle(RIGHT, beta)
    return q.rotate(FORWARD)


def measure_cursor_offset(
    oracle: ReticleOracle,
    controller_to_hand: Transform = Transform.identity(),
    epsilon: float = RETICLE_EPSILON,
    max_rounds: int = MAX_ROUNDS,
    record: Optional[dict[str, Any]] = None,
) -> CursorOffset:
    """Recover the canonical hand-to-cursor offset by two reticle stationarity tests.

    Direction: translating the hand along a guess g leaves the reticle still
    only when g is the cursor's forward axis. The horizontal reticle shift
    vanishes at the true yaw for any pitch, so yaw and pitch bisect in turn.

    Position: a half turn of the hand about the line through a guess point
    along the forward axis leaves the reticle still only when the line is the
    cursor line. With e1, e2 spanning the plane normal to the axis, the shift
    is linear in both guess coordinates; crossing it with the screen image of
    e2 isolates the e1 coordinate and vice versa.
    """
    hand0 = Transform.identity()
    r0 = _observe(oracle.reticle, hand0, controller_to_hand)

    def shift(hand: Transform) -> NDArray[np.float64]:
        return _observe(oracle.reticle, hand, controller_to_hand) - r0

    def translated(alpha: float, beta: float) -> NDArray[np.float64]:
        g = _direction(alpha, beta) * TRANSLATION_STEP
        return shift(Transform(g, UnitQuat.identity()))

    iterations: list[int] = []
    alpha = beta = 0.0
    residual = math.inf
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        xtol = max(INITIAL_XTOL * 10.0 ** (-3 * (rounds - 1)), 1e-15)
        beta_now = beta
        alpha, n_alpha = _bisect(lambda a: float(translated(a, beta_now)[0]), -ANGLE_BRACKET, ANGLE_BRACKET, xtol, "cursor yaw")
        alpha_now = alpha
        beta, n_beta = _bisect(lambda b: float(translated(alpha_now, b)[1]), -ANGLE_BRACKET, ANGLE_BRACKET, xtol, "cursor pitch")
        iterations += [n_alpha, n_beta]
        residual = float(np.linalg.norm(translated(alpha, beta)))
        if residual < epsilon:
            break
    else:
        raise NoConvergence(f"Cursor direction still moves the reticle by {residual:.3g} after {max_rounds} rounds")
    direction_rounds = rounds
    f = _direction(alpha, beta).normalized()

    e1 = f.cross(UP).normalized()
    e2 = f.cross(e1).normalized()

    def on_screen(v: Vec3) -> NDArray[np.float64]:
        return np.array([v.x - f.x * v.z / f.z, v.y - f.y * v.z / f.z])

    k1, k2 = on_screen(e1), on_screen(e2)
    half_turn = UnitQuat.from_axis_angle(f, math.pi)

    def turned(a: float, b: float) -> NDArray[np.float64]:
        c = e1 * a + e2 * b
        return shift(Transform(c - half_turn.rotate(c), half_turn))

    a = b = 0.0
    for rounds in range(1, max_rounds + 1):
        xtol = max(INITIAL_XTOL * 10.0 ** (-3 * (rounds - 1)), 1e-15)
        b_now = b
        a, n_a = _bisect(lambda u: _cross2(k2, turned(u, b_now)), -POSITION_BRACKET, POSITION_BRACKET, xtol, "cursor e1 offset")
        a_now = a
        b, n_b = _bisect(lambda v: _cross2(k1, turned(a_now, v)), -POSITION_BRACKET, POSITION_BRACKET, xtol, "cursor e2 offset")
        iterations += [n_a, n_b]
        residual = float(np.linalg.norm(turned(a, b)))
        if residual < epsilon:
            break
    else:
        raise NoConvergence(f"Cursor position still moves the reticle by {residual:.3g} after {max_rounds} rounds")

    offset = CursorOffset(Transform(e1 * a + e2 * b, UnitQuat.from_two_vectors(FORWARD, f)))
    logger.info(
        "Cursor offset: forward %s, origin %s (%s + %s rounds, %s oracle queries)",
        tuple(round(c, 6) for c in f.as_tuple()),
        tuple(round(c, 6) for c in offset.transform.position.as_tuple()),
        direction_rounds,
        rounds,
        oracle.queries,
    )
    if record is not None:
        record.update(
            {
                "direction_rounds": direction_rounds,
                "position_rounds": rounds,
                "bisection_iterations": iterations,
                "reticle_residual": residual,
                "oracle_queries": oracle.queries,
                "angle_bracket_deg": math.degrees(ANGLE_BRACKET),
                "position_bracket_m": POSITION_BRACKET,
                "epsilon": epsilon,
            }
        )
    return offset


class _CornerSearch:
    """Aims the cursor at corner marks and finds each corner's distance by the cone test."""

    def __init__(self, view: KeyboardView, cursor: CursorOffset, head: Transform, controller_to_hand: Transform) -> None:
        self.view = view
        self.cursor = cursor
        self.controller_to_hand = controller_to_hand
        player = player_pose(head)
        self.hand_position = player.apply(HAND_POSITION)
        self.frame = player.rotation
        toward = player.apply(ROUGH_KEYBOARD_POINT) - self.hand_position
        self.base_rotation = UnitQuat.from_two_vectors(cursor.forward, toward)
        self.guess = np.zeros(2)

    def _hand(self, angles: NDArray[np.float64]) -> Transform:
        turn = UnitQuat.from_axis_angle(UP, float(angles[0])) * UnitQuat.from_axis_angle(RIGHT, float(angles[1]))
        # yaw and pitch taken in the player frame so the search is well conditioned at any heading
        q = self.frame * turn * self.frame.conjugate()
        return Transform(self.hand_position, (q * self.base_rotation).normalized())

    def _seen(self, hand: Transform) -> NDArray[np.float64]:
        return _observe(self.view.reticle, hand, self.controller_to_hand)

    def aim(self, mark: Point2) -> Transform:
        target = np.array(mark, dtype=np.float64)
        solution = root(lambda x: self._seen(self._hand(x)) - target, self.guess, method="hybr")
        hand = self._hand(solution.x)
        miss = float(np.linalg.norm(self._seen(hand) - target))
        if miss > AIM_TOLERANCE:
            raise NoConvergence(f"Could not aim at corner mark {mark}: reticle {miss:.3g} away ({solution.message})")
        self.guess = solution.x
        return hand

    def distance(self, hand: Transform) -> float:
        """Distance along the cursor ray at which pivoting the cursor leaves the reticle still."""
        pose = self.cursor.cursor_pose(hand)
        origin, d = pose.position, pose.forward().normalized()
        pivot = UnitQuat.from_axis_angle(d.cross(UP), CONE_ANGLE)
        reference = self._seen(hand)

        def moved(t: float) -> NDArray[np.float64]:
            apex = origin + d * t
            swung = Transform(apex + pivot.rotate(hand.position - apex), (pivot * hand.rotation).normalized())
            return self._seen(swung) - reference

        near = moved(CONE_NEAR)
        t, _ = _bisect(lambda t: float(np.dot(moved(t), near)), CONE_NEAR, CONE_FAR, CONE_XTOL, "corner distance")
        return t

    def corner(self, mark: Point2) -> Vec3:
        hand = self.aim(mark)
        pose = self.cursor.cursor_pose(hand)
        return pose.position + pose.forward().normalized() * self.distance(hand)


def measure_key_corners(
    view: KeyboardView,
    cursor: CursorOffset,
    head: Transform,
    controller_to_hand: Transform = Transform.identity(),
    labels: Optional[Sequence[str]] = None,
) -> dict[str, Quad]:
    """World-space corners of every visible key, measured from a hand held below the head."""
    search = _CornerSearch(view, cursor, head, controller_to_hand)
    marks = view.corner_marks()
    wanted = list(marks) if labels is None else list(labels)
    quads: dict[str, Quad] = {}
    for i, label in enumerate(wanted, start=1):
        a, b, c, d = (search.corner(mark) for mark in marks[label])
        quads[label] = Quad((a, b, c, d))
        if should_log_progress(i, len(wanted)):
            logger.info("Measured key %s/%s (%r), %s reticle queries so far", i, len(wanted), label, view.queries)
    return quads


def _check_poses(heads: Sequence[Transform]) -> None:
    players = [player_pose(h) for h in heads]
    distinct: list[Transform] = []
    for p in players:
        if not any(p.is_close(q, 1e-6) for q in distinct):
            distinct.append(p)
    if len(distinct) < 3:
        raise DegeneratePoses(f"Need at least 3 distinct player poses, got {len(distinct)}")
    yaws = np.array([p.rotation.yaw() for p in distinct])
    if np.ptp(np.unwrap(yaws)) < 1e-6:
        positions = np.array([p.position.as_tuple() for p in distinct])
        if np.linalg.matrix_rank(positions[1:] - positions[0], tol=1e-6) <= 1:
            raise DegeneratePoses("Player poses share one heading and lie on a line")


def fit_keyboard_pose_rule(
    measurements: Sequence[tuple[Transform, Mapping[str, Quad]]], kb: KeyboardModel
) -> RigidFit:
    """Least-squares keyboard pose relative to the player pose, from key corners measured at several heads."""
    _check_poses([head for head, _ in measurements])
    source: list[tuple[float, float, float]] = []
    target: list[tuple[float, float, float]] = []
    for head, quads in measurements:
        to_player = inverse(player_pose(head))
        for label, quad in quads.items():
            for local, world in zip(kb.key(label).quad.corners, quad.corners):
                source.append(local.as_tuple())
                target.append(to_player.apply(world).as_tuple())
    fit = fit_rigid_transform(np.array(source), np.array(target))
    logger.info(
        "Keyboard pose rule from %s poses and %s corners: rms %.3g m, max %.3g m",
        len(measurements),
        len(source),
        fit.rms_residual,
        fit.max_residual,
    )
    return fit


def holdout_error(rule: Transform, kb: KeyboardModel, head: Transform, measured: Mapping[str, Quad]) -> float:
    """Largest key-center distance between the rule's prediction at an unseen pose and the measured keys."""
    predicted = kb.with_pose_rule(rule).place(head)
    return max((predicted.quads[label].center - quad.center).norm() for label, quad in measured.items())


def run_calibration(cfg: LabConfig) -> CalibrationReport:
    """Correlate field semantics, then measure the cursor offset and keyboard pose rule against the simulated app."""
    registry = cfg.load_registry()
    codec = cfg.codec(registry)
    kb = cfg.keyboard()
    truth_offset = cfg.cursor_offset()
    user_id = cfg.victim_ids[0]

    script = scripted_replay(default_isolation_sweeps(), user_id=user_id, device_rate=cfg.device_rate)
    room = RoomConfig(
        tick_rate=cfg.tick_rate,
        device_rate=cfg.device_rate,
        seed=cfg.seed,
        users=(user_id,),
        observer_id=cfg.observer_id,
    )
    trace = run_session(room, [script], DEFAULT_BACKGROUND, registry, codec, cfg.start_time, session_echo(codec))
    correlator = FieldCorrelator(registry)
    correlator.add(script, trace)
    semantics = correlator.semantics()
    logger.info_with_newline("Recovered %s semantic channels from %s packets", len(semantics.channels), len(correlator.observations))

    search: dict[str, Any] = {}
    offset = measure_cursor_offset(ReticleOracle(truth_offset), record=search)

    measurements: list[tuple[Transform, dict[str, Quad]]] = []
    for i, spec in enumerate(CALIBRATION_HEADS, start=1):
        head = head_pose(*spec)
        view = KeyboardView(truth_offset, kb.place(head))
        measurements.append((head, measure_key_corners(view, offset, head)))
        logger.info("Keyboard pose %s/%s measured (%s reticle queries)", i, len(CALIBRATION_HEADS), view.queries)

    fit = fit_keyboard_pose_rule(measurements[:-1], kb)
    held_head, held_quads = measurements[-1]
    holdout = holdout_error(fit.transform, kb, held_head, held_quads)
    logger.info("Hold-out pose: predicted key centers within %.3g m", holdout)

    first_head, first_quads = measurements[0]
    search["calibration_heads"] = [list(spec) for spec in CALIBRATION_HEADS]
    search["key_corner_head"] = transform_to_dict(first_head)
    residuals = {
        "semantics_fit_max": max(correlator.fit_residuals.values(), default=0.0),
        "cursor_reticle": float(search["reticle_residual"]),
        "pose_rule_rms": fit.rms_residual,
        "pose_rule_max": fit.max_residual,
        "pose_rule_holdout": holdout,
    }
    return CalibrationReport(
        semantics=semantics,
        cursor_offset=offset,
        pose_rule=fit.transform,
        residuals=residuals,
        search=search,
        key_corners={
            label: [list(c.as_tuple()) for c in quad.corners] for label, quad in sorted(first_quads.items())
        },
    )
