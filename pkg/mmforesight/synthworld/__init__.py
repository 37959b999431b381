from .structures import (
    SceneSpec,
    ContactEvent,
    Trajectory,
    LIGHT,
    HEAVY,
    SQUARE,
    DISC,
    FLOOR,
    FRAME_SIZE,
)
from .simulate import simulate
from .render import render, render_frame
from .generator import (
    ObjectCatalog,
    allocate,
    random_scene,
    ambiguous_pair,
    generate_trials,
    generate_dataset,
)
