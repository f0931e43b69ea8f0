"""Signed distances between primitives, robot-vs-scene collision reports, and
discretized edge validity.
"""

import numpy as np

from motionlab import samples
from motionlab.geometry import robot_in_collision, segment_valid, shape_distance
from motionlab.scene import CollisionObject
from motionlab.shapes import Box, Capsule, Cylinder, Sphere
from motionlab.transforms import Pose

P = Pose.from_xyz

# Closed-form pairs: sphere/sphere, sphere/capsule, capsule/capsule,
# sphere/box. Positive = separation, negative = penetration depth.
print("spheres 2 m apart:", shape_distance(Sphere(0.5), P(0, 0, 0), Sphere(0.5), P(2, 0, 0)))
print("spheres overlapping:", shape_distance(Sphere(0.5), P(0, 0, 0), Sphere(0.5), P(0.6, 0, 0)))
print("sphere vs box face:", shape_distance(Sphere(0.2), P(1, 0, 0), Box((0.5, 0.5, 0.5)), P(0, 0, 0)))

# Everything else goes through GJK (separation) and EPA (penetration).
print("boxes, face gap:", shape_distance(Box((0.5,) * 3), P(0, 0, 0), Box((0.5,) * 3), P(1.2, 0, 0)))
print("boxes, overlap:", shape_distance(Box((0.5,) * 3), P(0, 0, 0), Box((0.5,) * 3), P(0.7, 0, 0)))
print("cylinders:", shape_distance(Cylinder(0.2, 0.3), P(0, 0, 0), Cylinder(0.2, 0.3), P(0.9, 0, 0)))

# A sphere sitting right on the second link of the planar arm.
arm = samples.two_link_planar()
pillar = [CollisionObject(id="pillar", shape=Sphere(0.3), pose=P(1.5, 0.0, 0.0))]

report = robot_in_collision(arm, "default", [0.0, 0.0], pillar)
print("\narm straight through the sphere:", report.in_collision)
for contact in report.contacts:
    print(f"  {contact.first} vs {contact.second}: {contact.penetration_depth:.3f} m deep")

report = robot_in_collision(arm, "default", [np.pi / 2, 0.0], pillar)
print(f"arm pointing up: collision={report.in_collision}, clearance={report.min_clearance:.3f} m")

# Edge validity sweeps interpolated states at a fixed joint-space resolution.
# Both endpoints below are free, but the sweep between them passes through
# the straight-out pose that collides.
free_a, free_b = [np.pi / 2, 0.0], [-np.pi / 2, 0.0]
print("\nedge sweeping through the pillar:",
      segment_valid(arm, "default", free_a, free_b, pillar, step=0.05))
print("edge staying clear:",
      segment_valid(arm, "default", free_a, [2.0, 0.3], pillar, step=0.05))
