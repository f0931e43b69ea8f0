"""Versioned world model: collision objects plus the robot joint state, with a
change journal.

Every mutation bumps the scene version by exactly one and appends to the
journal. `journal_since` returns a coalesced diff carrying at most one net
operation per object: repeated pose updates collapse to the final SetPose,
add-then-remove collapses to nothing, and a resize is journaled literally as
Remove followed by Add of the new shape, so replicas that only understand
add / set-pose / remove stay compatible.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .robot import JointState, RobotModel, clamp_to_limits
from .shapes import InvalidShape, Shape, shape_from_dict, shape_to_dict
from .transforms import Pose

JOURNAL_RETENTION = 10_000


class DuplicateId(ValueError):
    pass


class UnknownId(KeyError):
    pass


class VersionEvicted(LookupError):
    """The requested base version left the journal; take a fresh snapshot."""


@dataclass(frozen=True, eq=False)
class CollisionObject:
    id: str
    shape: Shape
    pose: Pose
    revision: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValueError("collision object id must be nonempty")

    def to_dict(self) -> dict:
        return {"id": self.id, "shape": shape_to_dict(self.shape), "pose": self.pose.to_dict()}

    @staticmethod
    def from_dict(d: dict) -> "CollisionObject":
        return CollisionObject(
            id=d["id"], shape=shape_from_dict(d["shape"]), pose=Pose.from_dict(d["pose"])
        )


@dataclass(frozen=True, eq=False)
class AddOp:
    object: CollisionObject
    kind = "add"

    def to_dict(self):
        return {"op": "add", "object": self.object.to_dict()}


@dataclass(frozen=True, eq=False)
class SetPoseOp:
    id: str
    pose: Pose
    kind = "set_pose"

    def to_dict(self):
        return {"op": "set_pose", "id": self.id, "pose": self.pose.to_dict()}


@dataclass(frozen=True)
class RemoveOp:
    id: str
    kind = "remove"

    def to_dict(self):
        return {"op": "remove", "id": self.id}


SceneOp = AddOp | SetPoseOp | RemoveOp


def op_from_dict(d: dict) -> SceneOp:
    kind = d.get("op")
    if kind == "add":
        return AddOp(CollisionObject.from_dict(d["object"]))
    if kind == "set_pose":
        return SetPoseOp(id=d["id"], pose=Pose.from_dict(d["pose"]))
    if kind == "remove":
        return RemoveOp(id=d["id"])
    raise ValueError(f"unknown scene op {kind!r}")


@dataclass(eq=False)
class SceneDiff:
    from_version: int
    to_version: int
    ops: list
    robot_state: JointState | None = None

    def to_dict(self) -> dict:
        d = {
            "from_version": self.from_version,
            "to_version": self.to_version,
            "ops": [op.to_dict() for op in self.ops],
        }
        if self.robot_state is not None:
            d["robot_state"] = self.robot_state.to_dict()
        return d

    @staticmethod
    def from_dict(d: dict) -> "SceneDiff":
        rs = d.get("robot_state")
        return SceneDiff(
            from_version=d["from_version"],
            to_version=d["to_version"],
            ops=[op_from_dict(o) for o in d["ops"]],
            robot_state=None if rs is None else JointState.from_dict(rs),
        )


@dataclass
class _JournalEntry:
    to_version: int
    ops: list
    robot_state_changed: bool


class PlanningScene:
    """Single-writer authoritative scene. All mutations must come from one
    writer (the server serializes them on its event loop); journal_since and
    snapshot are consistent reads of a single version."""

    def __init__(
        self,
        model: RobotModel,
        group: str = "default",
        *,
        journal_retention: int = JOURNAL_RETENTION,
    ):
        self.model = model
        self.group = group
        self.objects: dict[str, CollisionObject] = {}
        n = len(model.group(group).joints)
        self.robot_state = JointState(group, clamp_to_limits(model, group, np.zeros(n)))
        self.version = 0
        self._journal: deque[_JournalEntry] = deque(maxlen=journal_retention)

    # -- mutations ----------------------------------------------------------

    def _record(self, ops, robot_state_changed=False) -> int:
        self.version += 1
        self._journal.append(_JournalEntry(self.version, ops, robot_state_changed))
        return self.version

    def add_object(self, obj: CollisionObject) -> int:
        if obj.id in self.objects:
            raise DuplicateId(obj.id)
        stored = CollisionObject(id=obj.id, shape=obj.shape, pose=obj.pose, revision=0)
        self.objects[obj.id] = stored
        return self._record([AddOp(stored)])

    def set_pose(self, object_id: str, pose: Pose) -> int:
        old = self._get(object_id)
        self.objects[object_id] = CollisionObject(
            id=object_id, shape=old.shape, pose=pose, revision=old.revision + 1
        )
        return self._record([SetPoseOp(object_id, pose)])

    def resize_object(self, object_id: str, new_shape: Shape) -> int:
        if not isinstance(new_shape, Shape):
            raise InvalidShape(f"not a shape: {new_shape!r}")
        old = self._get(object_id)
        # resizing has no in-place representation: journaled as remove + add
        replacement = CollisionObject(
            id=object_id, shape=new_shape, pose=old.pose, revision=old.revision + 1
        )
        self.objects[object_id] = replacement
        return self._record([RemoveOp(object_id), AddOp(replacement)])

    def remove_object(self, object_id: str) -> int:
        self._get(object_id)
        del self.objects[object_id]
        return self._record([RemoveOp(object_id)])

    def set_robot_state(self, q) -> int:
        clamped = clamp_to_limits(self.model, self.group, q)
        self.robot_state = JointState(self.group, clamped)
        return self._record([], robot_state_changed=True)

    def apply_op(self, op: SceneOp) -> int:
        if isinstance(op, AddOp):
            return self.add_object(op.object)
        if isinstance(op, SetPoseOp):
            return self.set_pose(op.id, op.pose)
        return self.remove_object(op.id)

    def _get(self, object_id: str) -> CollisionObject:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownId(object_id) from None

    # -- reads --------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "objects": [o.to_dict() for o in self.objects.values()],
            "robot_state": self.robot_state.to_dict(),
            "version": self.version,
        }

    def journal_since(self, version: int) -> SceneDiff:
        """Net change between `version` and now, one coalesced op run per
        object. Applying the diff to any replica at `version` reproduces the
        current scene exactly."""
        if version > self.version:
            raise ValueError(f"version {version} is ahead of scene version {self.version}")
        if version == self.version:
            return SceneDiff(from_version=version, to_version=version, ops=[])
        if not self._journal or self._journal[0].to_version > version + 1:
            raise VersionEvicted(version)

        window = [e for e in self._journal if e.to_version > version]
        first_seen: dict[str, int] = {}
        existed_at_start: dict[str, bool] = {}
        removed: dict[str, bool] = {}
        posed: dict[str, bool] = {}
        robot_changed = False
        order = 0
        for entry in window:
            robot_changed = robot_changed or entry.robot_state_changed
            for op in entry.ops:
                oid = op.object.id if isinstance(op, AddOp) else op.id
                if oid not in first_seen:
                    first_seen[oid] = order
                    order += 1
                    existed_at_start[oid] = not isinstance(op, AddOp)
                if isinstance(op, RemoveOp):
                    removed[oid] = True
                elif isinstance(op, SetPoseOp):
                    posed[oid] = True

        ops: list[SceneOp] = []
        for oid in sorted(first_seen, key=first_seen.get):
            current = self.objects.get(oid)
            if existed_at_start[oid]:
                if current is None:
                    ops.append(RemoveOp(oid))
                elif removed.get(oid):
                    ops.append(RemoveOp(oid))
                    ops.append(AddOp(current))
                elif posed.get(oid):
                    ops.append(SetPoseOp(oid, current.pose))
            elif current is not None:
                ops.append(AddOp(current))
        return SceneDiff(
            from_version=version,
            to_version=self.version,
            ops=ops,
            robot_state=self.robot_state if robot_changed else None,
        )


class SceneReplica:
    """Client-side mirror updated from snapshots and diffs."""

    def __init__(self):
        self.objects: dict[str, CollisionObject] = {}
        self.robot_state: JointState | None = None
        self.version = -1

    def apply_snapshot(self, snapshot: dict):
        self.objects = {
            d["id"]: CollisionObject.from_dict(d) for d in snapshot.get("objects", [])
        }
        rs = snapshot.get("robot_state")
        self.robot_state = JointState.from_dict(rs) if rs else None
        self.version = snapshot["version"]

    def apply_diff(self, diff: SceneDiff):
        if self.version != diff.from_version:
            raise VersionEvicted(
                f"replica at version {self.version}, diff starts at {diff.from_version}"
            )
        for op in diff.ops:
            if isinstance(op, AddOp):
                if op.object.id in self.objects:
                    raise DuplicateId(op.object.id)
                self.objects[op.object.id] = op.object
            elif isinstance(op, SetPoseOp):
                old = self.objects.get(op.id)
                if old is None:
                    raise UnknownId(op.id)
                self.objects[op.id] = CollisionObject(
                    id=op.id, shape=old.shape, pose=op.pose, revision=old.revision + 1
                )
            else:
                if op.id not in self.objects:
                    raise UnknownId(op.id)
                del self.objects[op.id]
        if diff.robot_state is not None:
            self.robot_state = diff.robot_state
        self.version = diff.to_version


def structurally_equal(a, b, *, compare_version: bool = True) -> bool:
    """Structural equality of two scene-like holders (PlanningScene, replica,
    or snapshot application): same object ids, shapes, poses (bit-exact), and
    robot state."""

    def doc(x):
        objs = {oid: o.to_dict() for oid, o in x.objects.items()}
        rs = x.robot_state.to_dict() if x.robot_state is not None else None
        return objs, rs

    if compare_version and a.version != b.version:
        return False
    return doc(a) == doc(b)


# -- persistence (versionless document, distinct from the wire journal) ------

def scene_to_document(scene) -> dict:
    return {
        "objects": [o.to_dict() for o in scene.objects.values()],
        "robot_state": scene.robot_state.to_dict(),
    }


def scene_from_document(doc: dict, model: RobotModel, group: str = "default") -> PlanningScene:
    scene = PlanningScene(model, group)
    for entry in doc.get("objects", []):
        scene.add_object(CollisionObject.from_dict(entry))
    rs = doc.get("robot_state")
    if rs:
        scene.set_robot_state(np.asarray(rs["positions"], dtype=float))
    # loaded documents start fresh: version 0, empty journal
    scene.version = 0
    scene._journal.clear()
    return scene


def save_scene(scene, path: str | Path):
    Path(path).write_text(json.dumps(scene_to_document(scene), indent=2) + "\n")


def load_scene(path: str | Path, model: RobotModel, group: str = "default") -> PlanningScene:
    doc = json.loads(Path(path).read_text())
    return scene_from_document(doc, model, group)
