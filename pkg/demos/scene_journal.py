"""The versioned planning scene and its coalescing change journal: what a
replica actually receives after a burst of edits.
"""

import numpy as np

from motionlab import samples
from motionlab.scene import CollisionObject, PlanningScene, SceneReplica, structurally_equal
from motionlab.shapes import Box, Sphere
from motionlab.transforms import Pose

P = Pose.from_xyz

scene = PlanningScene(samples.two_link_planar())
scene.add_object(CollisionObject(id="crate", shape=Box((0.2, 0.2, 0.2)), pose=P(1, 0, 0)))
scene.add_object(CollisionObject(id="ball", shape=Sphere(0.15), pose=P(0, 1, 0)))

# A replica bootstraps from a snapshot...
replica = SceneReplica()
replica.apply_snapshot(scene.snapshot())
base = scene.version
print(f"replica synced at version {base}")

# ...then the operator drags the crate around (dozens of pose updates),
# resizes the ball, and parks the robot somewhere new.
for i in range(25):
    scene.set_pose("crate", P(1 + 0.02 * i, 0.01 * i, 0))
scene.resize_object("ball", Sphere(0.3))
scene.set_robot_state([0.4, -0.8])
print(f"server advanced to version {scene.version} "
      f"({scene.version - base} mutations)")

# The catch-up diff coalesces all of that to the net change per object: one
# final pose for the crate, and the resize journaled as remove + add.
diff = scene.journal_since(base)
print("coalesced ops:")
for op in diff.ops:
    print("  ", op.to_dict())
print("robot state included:", diff.robot_state is not None)

replica.apply_diff(diff)
print("replica equals server after one diff:", structurally_equal(replica, scene))

# Deleting something that was added inside the window leaves no trace at all.
base = scene.version
scene.add_object(CollisionObject(id="ghost", shape=Sphere(0.1), pose=P(0, 0, 1)))
scene.remove_object("ghost")
print("add-then-remove coalesces to:", scene.journal_since(base).ops)
