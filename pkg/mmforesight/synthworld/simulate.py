import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..exceptions import InputError
from ..sensors import Behavior
from .structures import FLOOR, FRAME_SIZE, ContactEvent, SceneSpec, Trajectory

HORIZONTAL = 0
VERTICAL = 2

SHAKE_PERIOD = 6.0
LIFT_DELAY = 1.0
OPEN, CLOSED = 1.0, 0.3


def _approach(t: np.ndarray, target: float, speed: float, contact: float) -> np.ndarray:
    """
    Arm coordinate closing on `target` at constant speed, arriving at `contact`
    """
    return target - speed * np.maximum(contact - t, 0.0)


def _bounces(
    height: float, elasticity: float, horizon: float
) -> Tuple[List[Tuple[float, float]], Callable[[np.ndarray], np.ndarray]]:
    """
    Free fall under g = 1 px/step² from rest `height` px above the floor.

    :return: the (time, impact speed) of every floor contact before
        `horizon`, and a function giving the height above the floor at time t
    """
    contacts = []
    if height <= 0:
        return contacts, lambda t: np.zeros_like(t)

    first = math.sqrt(2.0 * height)
    contacts.append((first, first))
    speed, start = elasticity * first, first
    while speed >= 0.5 and start < horizon:
        start += 2.0 * speed
        contacts.append((start, speed))
        speed *= elasticity

    def elevation(t: np.ndarray) -> np.ndarray:
        out = np.where(t < first, height - 0.5 * t * t, 0.0)
        for (begin, impact), (end, _) in zip(contacts, contacts[1:]):
            rebound = impact * elasticity
            dt = t - begin
            flight = (t >= begin) & (t < end)
            out = np.where(flight, rebound * dt - 0.5 * dt * dt, out)
        return np.maximum(out, 0.0)

    return [c for c in contacts if c[0] < horizon], elevation


def simulate(spec: SceneSpec, T: Optional[int] = None) -> Trajectory:
    """
    Scripted kinematics of one behavior. Positions are object centres and
    arm tips in pixels; y grows downwards and the floor is at y = FLOOR.
    """
    T = spec.default_length if T is None else T
    if T < 8:
        raise InputError(f"Trials need at least 8 frames, got {T}")

    t = np.arange(T, dtype=np.float64)
    m = spec.mass_value
    v = spec.arm_speed
    tc = spec.contact_time
    half = spec.size / 2.0

    ox = np.full(T, spec.object_x)
    oy = np.full(T, FLOOR - half)
    side = spec.object_x - half - 1.0
    top = FLOOR - spec.size - 1.0
    ax = np.full(T, spec.object_x)
    ay = np.full(T, top)

    contacts: List[ContactEvent] = []
    load, load_onset = 0.0, math.inf
    aperture, aperture_onset = (OPEN, OPEN), math.inf
    strike = v * (1.0 + m) / 2.0

    behavior = spec.behavior
    if behavior in (Behavior.PUSH, Behavior.POKE):
        ay = oy.copy()
        ax = _approach(t, side, v, tc)
        contacts.append(ContactEvent(tc, strike, HORIZONTAL))
        after = np.maximum(t - tc, 0.0)
        if behavior == Behavior.PUSH:
            ox = spec.object_x + (v / m) * after
            ax = np.where(t >= tc, ox - half - 1.0, ax)
            load, load_onset = 0.2 * m, tc
        else:
            ox = spec.object_x + np.minimum(after, 1.0) * 2.0 / m
            ax = np.where(t >= tc, side + (ox - spec.object_x) - v * after, ax)

    elif behavior in (Behavior.PRESS, Behavior.TAP, Behavior.GRASP, Behavior.LIFT):
        ay = _approach(t, top, v, tc)
        after = np.maximum(t - tc, 0.0)
        if behavior == Behavior.PRESS:
            contacts.append(ContactEvent(tc, strike, VERTICAL))
            load, load_onset = 0.5, tc
        elif behavior == Behavior.TAP:
            contacts.append(ContactEvent(tc, strike, VERTICAL))
            ay = np.where(t >= tc, top - v * after, ay)
        else:
            contacts.append(ContactEvent(tc, 0.5 * strike, VERTICAL))
            aperture, aperture_onset = (OPEN, CLOSED), tc
            if behavior == Behavior.LIFT:
                rise = (1.5 / m) * np.maximum(t - tc - LIFT_DELAY, 0.0)
                oy = oy - rise
                ay = np.where(t >= tc, oy - half - 1.0, ay)
                load, load_onset = m, tc + LIFT_DELAY

    elif behavior == Behavior.HOLD:
        load, load_onset = m, -math.inf
        aperture = (CLOSED, CLOSED)

    elif behavior == Behavior.SHAKE:
        amplitude = 3.0 / math.sqrt(m)
        omega = 2.0 * math.pi / SHAKE_PERIOD
        oy = oy - 4.0
        ox = spec.object_x + amplitude * np.sin(omega * t)
        ax = ox.copy()
        ay = oy - half - 1.0
        load, load_onset = m, -math.inf
        aperture = (CLOSED, CLOSED)
        reversal = SHAKE_PERIOD / 4.0
        while reversal < T - 1:
            contacts.append(ContactEvent(reversal, 0.5 * m * amplitude * omega, HORIZONTAL))
            reversal += SHAKE_PERIOD / 2.0

    elif behavior == Behavior.DROP:
        start = FLOOR - half - spec.height
        bounces, elevation = _bounces(spec.height, spec.elasticity, T - 1)
        oy = FLOOR - half - elevation(t)
        ay = np.full(T, start - half - 1.0)
        aperture, aperture_onset = (CLOSED, OPEN), 0.0
        contacts += [
            ContactEvent(time, m * speed * (1.0 + spec.elasticity), VERTICAL)
            for time, speed in bounces
        ]

    object_pose = np.stack([ox, oy], axis=1)
    clamped_pose = np.stack(
        [np.clip(ox, half, FRAME_SIZE - half), np.clip(oy, half, FLOOR - half)], axis=1
    )
    clamped = [int(i) for i in np.flatnonzero(np.any(clamped_pose != object_pose, axis=1))]
    if clamped:
        logging.getLogger("mmforesight.py").warning(
            f"Object {spec.object_id} ({behavior}) clamped to the frame at frames {clamped}"
        )

    return Trajectory(
        clamped_pose,
        np.stack([ax, ay], axis=1),
        [c for c in contacts if c.time <= T - 1],
        load,
        load_onset,
        aperture,
        aperture_onset,
        clamped,
    )
