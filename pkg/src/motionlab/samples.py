"""Bundled sample robots and scenes used by demos and tests."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .robot import RobotModel, parse_urdf

URDF_NAMES = ("two_link_planar", "three_link_planar", "six_dof_arm")
SCENE_NAMES = ("table", "blocked_corridor")


def urdf_path(name: str) -> Path:
    return Path(resources.files("motionlab").joinpath(f"data/urdf/{name}.urdf"))


def scene_path(name: str) -> Path:
    return Path(resources.files("motionlab").joinpath(f"data/scenes/{name}.json"))


def load_sample_model(name: str, *, cylinders_as_capsules: bool = True) -> RobotModel:
    """Bundled URDFs treat their collision cylinders as capsules by default:
    conservative, and the capsule distance queries are closed-form."""
    return parse_urdf(urdf_path(name).read_text(), cylinders_as_capsules=cylinders_as_capsules)


def two_link_planar() -> RobotModel:
    return load_sample_model("two_link_planar")


def three_link_planar() -> RobotModel:
    return load_sample_model("three_link_planar")


def six_dof_arm() -> RobotModel:
    return load_sample_model("six_dof_arm")
