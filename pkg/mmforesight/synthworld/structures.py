import math
from typing import List, Tuple

import numpy as np

from ..exceptions import ConfigError
from ..sensors import Behavior

FRAME_SIZE = 32
FLOOR = 28

LIGHT = "light"
HEAVY = "heavy"
MASSES = {LIGHT: 1.0, HEAVY: 3.0}

SQUARE = "square"
DISC = "disc"
SHAPES = (SQUARE, DISC)

PALETTE = (
    (220, 40, 40),
    (40, 180, 60),
    (50, 90, 220),
    (230, 200, 40),
    (200, 60, 200),
    (40, 200, 200),
    (240, 140, 30),
)


class SceneSpec:
    """
    Everything needed to script and render one trial. The object's mass
    changes the dynamics and the sensor streams, never its appearance.
    """

    def __init__(
        self,
        behavior: str,
        shape: str = SQUARE,
        color: Tuple[int, int, int] = PALETTE[0],
        size: int = 5,
        mass: str = LIGHT,
        elasticity: float = 0.4,
        object_x: float = 14.0,
        arm_speed: float = 1.0,
        contact_time: float = 4.0,
        height: int = 0,
        seed: int = 0,
        object_id: int = 0,
    ) -> None:
        Behavior.validate(behavior)
        if shape not in SHAPES:
            raise ConfigError(f"Unknown shape {shape!r}")
        if mass not in MASSES:
            raise ConfigError(f"Mass must be one of {sorted(MASSES)}")
        if not 2 <= size <= FRAME_SIZE // 2:
            raise ConfigError(f"Object size {size} is out of range")
        if not 0.0 <= elasticity < 1.0:
            raise ConfigError("Elasticity must lie in [0, 1)")
        if arm_speed <= 0:
            raise ConfigError("Arm speed must be positive")
        if contact_time < 0:
            raise ConfigError("Contact time cannot be negative")
        if not size / 2 <= object_x <= FRAME_SIZE - size / 2:
            raise ConfigError(f"Object at x={object_x} is not fully inside the frame")
        if height < 0 or FLOOR - height - size < 0:
            raise ConfigError(f"Object dropped from {height}px is not fully inside the frame")

        self.behavior = behavior
        self.shape = shape
        self.color = tuple(int(c) for c in color)
        self.size = int(size)
        self.mass = mass
        self.elasticity = float(elasticity)
        self.object_x = float(object_x)
        self.arm_speed = float(arm_speed)
        self.contact_time = float(contact_time)
        self.height = int(height)
        self.seed = int(seed)
        self.object_id = int(object_id)

    @property
    def mass_value(self) -> float:
        return MASSES[self.mass]

    @property
    def default_length(self) -> int:
        return 10 if self.behavior in (Behavior.GRASP, Behavior.TAP) else 20

    def replace(self, **changes) -> "SceneSpec":
        values = dict(vars(self))
        values.update(changes)
        return SceneSpec(**values)

    def __eq__(self, other) -> bool:
        return isinstance(other, SceneSpec) and vars(self) == vars(other)

    def __str__(self) -> str:
        return "SceneSpec[{}]".format(
            ", ".join(f"{key}={value}" for key, value in vars(self).items())
        )


class ContactEvent:
    def __init__(self, time: float, impulse: float, axis: int = 0) -> None:
        self.time = float(time)
        self.impulse = float(impulse)
        # 0 horizontal, 2 vertical
        self.axis = axis

    @property
    def frame(self) -> int:
        """
        First frame index at or after the contact
        """
        return int(math.ceil(self.time - 1e-9))

    def __str__(self) -> str:
        return "ContactEvent[time={:.4g}, impulse={:.4g}, axis={}]".format(
            self.time, self.impulse, self.axis
        )


class Trajectory:
    """
    Per-frame object centre and arm tip positions (x, y in pixels), the
    contact events and the sustained load on the arm.
    """

    def __init__(
        self,
        object_pose: np.ndarray,
        arm_pose: np.ndarray,
        contacts: List[ContactEvent],
        load: float = 0.0,
        load_onset: float = math.inf,
        aperture: Tuple[float, float] = (1.0, 1.0),
        aperture_onset: float = math.inf,
        clamped: List[int] = (),
    ) -> None:
        self.object_pose = np.asarray(object_pose, dtype=np.float64)
        self.arm_pose = np.asarray(arm_pose, dtype=np.float64)
        self.contacts = sorted(contacts, key=lambda c: c.time)
        self.load = float(load)
        self.load_onset = float(load_onset)
        self.aperture = aperture
        self.aperture_onset = float(aperture_onset)
        self.clamped = list(clamped)

    @property
    def T(self) -> int:
        return len(self.object_pose)

    def load_at(self, times: np.ndarray) -> np.ndarray:
        return np.where(np.asarray(times) >= self.load_onset, self.load, 0.0)

    def aperture_at(self, times: np.ndarray) -> np.ndarray:
        before, after = self.aperture
        return np.where(np.asarray(times) >= self.aperture_onset, after, before)

    def __str__(self) -> str:
        return "Trajectory[T={}, contacts={}, clamped={}]".format(
            self.T, len(self.contacts), self.clamped
        )
