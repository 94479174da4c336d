"""Goal-regressive planning for editing 3D indoor scenes."""

from .geometry import Tolerances
from .lang import Call, GoalDocument, GroundAtom, PlanDocument, parse_goals, parse_plan, print_document
from .scene import Scene, SceneObject, load_scene, save_scene

__version__ = "0.1.0"

__all__ = [
    "Call",
    "GoalDocument",
    "GroundAtom",
    "PlanDocument",
    "Scene",
    "SceneObject",
    "Tolerances",
    "load_scene",
    "parse_goals",
    "parse_plan",
    "print_document",
    "save_scene",
]
