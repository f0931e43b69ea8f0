import json

import numpy as np
import pytest

from motionlab.scene import (
    AddOp,
    CollisionObject,
    DuplicateId,
    PlanningScene,
    RemoveOp,
    SceneDiff,
    SceneReplica,
    SetPoseOp,
    UnknownId,
    VersionEvicted,
    load_scene,
    save_scene,
    structurally_equal,
)
from motionlab.shapes import Box, Sphere
from motionlab.transforms import Pose

P = Pose.from_xyz


def box(object_id, x=0.0, y=0.0, z=0.0, half=0.1):
    return CollisionObject(id=object_id, shape=Box((half, half, half)), pose=P(x, y, z))


def replica_at(scene_snapshot):
    replica = SceneReplica()
    replica.apply_snapshot(scene_snapshot)
    return replica


def replay_check(scene, base_snapshot):
    """The journal oracle: applying journal_since(base) to a replica at base
    must reproduce the live scene exactly."""
    replica = replica_at(base_snapshot)
    diff = scene.journal_since(base_snapshot["version"])
    replica.apply_diff(diff)
    assert structurally_equal(replica, scene)
    return diff


@pytest.fixture()
def scene(two_link):
    return PlanningScene(two_link)


class TestMutations:
    def test_add(self, scene):
        version = scene.add_object(box("b1"))
        assert version == 1
        assert len(scene.objects) == 1

    def test_add_duplicate(self, scene):
        scene.add_object(box("b1"))
        with pytest.raises(DuplicateId):
            scene.add_object(box("b1"))

    def test_three_adds_journal(self, scene):
        for i in range(3):
            scene.add_object(box(f"b{i}"))
        diff = scene.journal_since(0)
        assert len(diff.ops) == 3
        assert all(isinstance(op, AddOp) for op in diff.ops)

    def test_set_pose(self, scene):
        scene.add_object(box("b1"))
        version = scene.set_pose("b1", P(1, 0, 0))
        assert version == 2
        assert np.allclose(scene.objects["b1"].pose.position, [1, 0, 0])
        assert scene.objects["b1"].revision == 1

    def test_set_pose_after_remove(self, scene):
        scene.add_object(box("b1"))
        scene.remove_object("b1")
        with pytest.raises(UnknownId):
            scene.set_pose("b1", P(1, 0, 0))

    def test_resize_journaled_as_remove_add(self, scene):
        scene.add_object(box("b1", half=0.5))
        base = scene.snapshot()
        scene.resize_object("b1", Box((1.0, 0.5, 0.5)))
        diff = replay_check(scene, base)
        assert [type(op) for op in diff.ops] == [RemoveOp, AddOp]
        assert diff.ops[1].object.shape.half_extents == (1.0, 0.5, 0.5)
        # pose untouched, one version step for the whole resize
        assert scene.version == base["version"] + 1

    def test_resize_to_identical_shape_still_remove_add(self, scene):
        scene.add_object(box("b1", half=0.5))
        base = scene.snapshot()
        scene.resize_object("b1", Box((0.5, 0.5, 0.5)))
        diff = replay_check(scene, base)
        assert [type(op) for op in diff.ops] == [RemoveOp, AddOp]

    def test_remove(self, scene):
        scene.add_object(box("b1"))
        scene.remove_object("b1")
        assert scene.objects == {}
        with pytest.raises(UnknownId):
            scene.remove_object("b1")

    def test_set_robot_state_clamps(self, scene):
        scene.set_robot_state([10.0, -10.0])
        limit = 3.0543261909900767
        assert np.allclose(scene.robot_state.positions, [limit, -limit])


class TestJournalCoalescing:
    def test_empty_diff(self, scene):
        diff = scene.journal_since(scene.version)
        assert diff.ops == []
        assert diff.from_version == diff.to_version == scene.version

    def test_pose_churn_coalesces_to_single_setpose(self, scene):
        scene.add_object(box("b1"))
        base = scene.snapshot()
        for i in range(5):
            scene.set_pose("b1", P(i + 1.0, 0, 0))
        diff = replay_check(scene, base)
        assert len(diff.ops) == 1
        (op,) = diff.ops
        assert isinstance(op, SetPoseOp)
        assert np.allclose(op.pose.position, [5, 0, 0])

    def test_hundred_updates_one_op(self, scene):
        scene.add_object(box("b1"))
        base = scene.snapshot()
        for i in range(100):
            scene.set_pose("b1", P(0.01 * i, 0, 0))
        diff = replay_check(scene, base)
        assert len(diff.ops) == 1

    def test_add_then_remove_coalesces_to_nothing(self, scene):
        base = scene.snapshot()
        scene.add_object(box("b1"))
        scene.remove_object("b1")
        diff = replay_check(scene, base)
        assert diff.ops == []

    def test_remove_then_readd_replays(self, scene):
        scene.add_object(box("b1", half=0.2))
        base = scene.snapshot()
        scene.remove_object("b1")
        scene.add_object(box("b1", x=2.0, half=0.3))
        replay_check(scene, base)

    def test_resize_then_move_coalesces(self, scene):
        scene.add_object(box("b1", half=0.2))
        base = scene.snapshot()
        scene.resize_object("b1", Box((0.4, 0.2, 0.2)))
        scene.set_pose("b1", P(3, 0, 0))
        diff = replay_check(scene, base)
        assert [type(op) for op in diff.ops] == [RemoveOp, AddOp]
        assert np.allclose(diff.ops[1].object.pose.position, [3, 0, 0])

    def test_diff_touches_only_modified_objects(self, scene):
        for i in range(50):
            scene.add_object(box(f"b{i}", x=float(i)))
        base = scene.snapshot()
        scene.set_pose("b3", P(100, 0, 0))
        scene.resize_object("b7", Box((0.9, 0.1, 0.1)))
        diff = replay_check(scene, base)
        touched = set()
        for op in diff.ops:
            touched.add(op.object.id if isinstance(op, AddOp) else op.id)
        assert touched == {"b3", "b7"}

    def test_robot_state_carried_when_changed(self, scene):
        scene.add_object(box("b1"))
        base = scene.snapshot()
        scene.set_robot_state([0.5, -0.5])
        diff = replay_check(scene, base)
        assert diff.robot_state is not None
        assert np.allclose(diff.robot_state.positions, [0.5, -0.5])
        base2 = scene.snapshot()
        scene.set_pose("b1", P(1, 0, 0))
        diff2 = scene.journal_since(base2["version"])
        assert diff2.robot_state is None

    def test_version_monotonic_by_one(self, scene):
        versions = [scene.add_object(box("a")), scene.set_pose("a", P(1, 0, 0)),
                    scene.resize_object("a", Box((0.2, 0.2, 0.2))), scene.remove_object("a"),
                    scene.set_robot_state([0.0, 0.0])]
        assert versions == [1, 2, 3, 4, 5]

    def test_journal_ahead_of_version_rejected(self, scene):
        with pytest.raises(ValueError):
            scene.journal_since(5)

    def test_eviction(self, two_link):
        scene = PlanningScene(two_link, journal_retention=10)
        scene.add_object(box("b1"))
        base = scene.snapshot()
        for i in range(20):
            scene.set_pose("b1", P(float(i), 0, 0))
        with pytest.raises(VersionEvicted):
            scene.journal_since(base["version"])
        # recent versions still served
        scene.journal_since(scene.version - 5)


class TestConvergence:
    def test_random_interleavings_converge(self, two_link, rng):
        """Any interleaving of the five mutations replays to equality from any
        retained base version."""
        for trial in range(10):
            scene = PlanningScene(two_link)
            snapshots = [scene.snapshot()]
            ids = []
            counter = 0
            for _ in range(200):
                ops = ["add"]
                if ids:
                    ops += ["set_pose", "resize", "remove", "robot"]
                op = ops[rng.integers(0, len(ops))]
                if op == "add":
                    name = f"o{counter}"
                    counter += 1
                    scene.add_object(box(name, x=float(rng.uniform(-1, 1))))
                    ids.append(name)
                elif op == "set_pose":
                    scene.set_pose(ids[rng.integers(0, len(ids))], P(*rng.uniform(-1, 1, 3)))
                elif op == "resize":
                    scene.resize_object(
                        ids[rng.integers(0, len(ids))], Box(tuple(rng.uniform(0.05, 0.4, 3)))
                    )
                elif op == "remove":
                    victim = ids.pop(rng.integers(0, len(ids)))
                    scene.remove_object(victim)
                else:
                    scene.set_robot_state(rng.uniform(-3, 3, 2))
                if rng.uniform() < 0.1:
                    snapshots.append(scene.snapshot())
            for base in snapshots:
                replica = replica_at(base)
                replica.apply_diff(scene.journal_since(base["version"]))
                assert structurally_equal(replica, scene)

    def test_replay_determinism(self, scene):
        scene.add_object(box("b1"))
        base = scene.snapshot()
        scene.set_pose("b1", P(1, 2, 3))
        diff = scene.journal_since(base["version"])
        r1, r2 = replica_at(base), replica_at(base)
        r1.apply_diff(diff)
        r2.apply_diff(diff)
        assert structurally_equal(r1, r2)

    def test_snapshot_equals_journal_replay(self, scene):
        for i in range(5):
            scene.add_object(box(f"b{i}", x=float(i)))
        scene.set_pose("b2", P(9, 9, 9))
        from_snapshot = replica_at(scene.snapshot())
        from_journal = SceneReplica()
        from_journal.apply_snapshot({"objects": [], "robot_state": None, "version": 0})
        from_journal.robot_state = scene.robot_state
        from_journal.apply_diff(scene.journal_since(0))
        assert structurally_equal(from_snapshot, from_journal)

    def test_diff_version_mismatch_rejected(self, scene):
        scene.add_object(box("b1"))
        stale = SceneDiff(from_version=5, to_version=6, ops=[])
        replica = replica_at(scene.snapshot())
        with pytest.raises(VersionEvicted):
            replica.apply_diff(stale)


class TestPersistence:
    def test_save_load_roundtrip(self, scene, two_link, tmp_path):
        scene.add_object(box("b1", x=0.5))
        scene.add_object(CollisionObject(id="s1", shape=Sphere(0.25), pose=P(1, 1, 0)))
        scene.set_robot_state([0.3, -0.4])
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        loaded = load_scene(path, two_link)
        assert structurally_equal(scene, loaded, compare_version=False)
        assert loaded.version == 0

    def test_file_format_field_names(self, scene, tmp_path):
        scene.add_object(box("b1"))
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"objects", "robot_state"}
        entry = doc["objects"][0]
        assert set(entry) == {"id", "shape", "pose"}
        assert set(entry["pose"]) == {"position", "orientation"}
        assert entry["shape"]["kind"] == "box"
        assert set(doc["robot_state"]) == {"group", "positions"}

    def test_wire_roundtrip_bit_exact(self, scene):
        scene.add_object(box("b1", x=0.1234567890123456789))
        doc = scene.snapshot()
        text = json.dumps(doc)
        again = json.loads(text)
        replica = replica_at(again)
        assert structurally_equal(replica, scene)
