"""Distance and collision queries between posed convex shapes, robot-vs-scene
collision reports, and discretized joint-space edge validity.

Sphere/capsule pairs and sphere-box use closed-form distances; every other
convex pair goes through GJK for separation and EPA for penetration depth.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kinematics import link_poses_full
from .robot import JointSpace, RobotModel, _as_positions
from .shapes import Box, Capsule, Shape, Sphere, shape_aabb, world_support
from .transforms import Pose

GJK_MAX_ITERATIONS = 128
GJK_PROGRESS_TOL = 1e-12
EPA_MAX_ITERATIONS = 96
EPA_GROWTH_TOL = 1e-8
DEFAULT_EDGE_STEP = 0.05


# ---------------------------------------------------------------------------
# closed-form pieces

def _point_segment_distance(p, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _segment_segment_distance(p1, q1, p2, q2) -> float:
    # Ericson, closest points of two segments
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    tiny = 1e-18
    if a < tiny and e < tiny:
        return float(np.linalg.norm(r))
    if a < tiny:
        s = 0.0
        t = np.clip(f / e, 0.0, 1.0)
    else:
        c = float(d1 @ r)
        if e < tiny:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > tiny else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    return float(np.linalg.norm((p1 + s * d1) - (p2 + t * d2)))


def _sphere_box_distance(center, sphere: Sphere, box: Box, box_pose: Pose) -> float:
    local = box_pose.rotation_matrix().T @ (center - box_pose.position)
    he = np.asarray(box.half_extents)
    d = np.abs(local) - he
    outside = float(np.linalg.norm(np.maximum(d, 0.0)))
    inside = float(min(max(d), 0.0))
    return outside + inside - sphere.radius


# ---------------------------------------------------------------------------
# GJK / EPA

def _closest_on_segment(pts):
    a, b = pts
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return a, [0]
    t = float(-(a @ ab) / denom)
    if t <= 0.0:
        return a, [0]
    if t >= 1.0:
        return b, [1]
    return a + t * ab, [0, 1]


def _closest_on_triangle(pts):
    a, b, c = pts
    ab = b - a
    ac = c - a
    # collinear triangle: fall back to the best edge
    if float(np.cross(ab, ac) @ np.cross(ab, ac)) < 1e-24:
        best_point, best_subset = None, None
        for (p, q), (ip, iq) in (((a, b), (0, 1)), ((a, c), (0, 2)), ((b, c), (1, 2))):
            point, sub = _closest_on_segment([p, q])
            if best_point is None or float(point @ point) < float(best_point @ best_point):
                best_point = point
                best_subset = [(ip, iq)[s] for s in sub]
        return best_point, best_subset
    ap = -a
    d1 = float(ab @ ap)
    d2 = float(ac @ ap)
    if d1 <= 0.0 and d2 <= 0.0:
        return a, [0]
    bp = -b
    d3 = float(ab @ bp)
    d4 = float(ac @ bp)
    if d3 >= 0.0 and d4 <= d3:
        return b, [1]
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        return a + v * ab, [0, 1]
    cp = -c
    d5 = float(ab @ cp)
    d6 = float(ac @ cp)
    if d6 >= 0.0 and d5 <= d6:
        return c, [2]
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        return a + w * ac, [0, 2]
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        return b + w * (c - b), [1, 2]
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    return a + ab * v + ac * w, [0, 1, 2]


_TETRA_FACES = ((0, 1, 2, 3), (0, 1, 3, 2), (0, 2, 3, 1), (1, 2, 3, 0))


def _closest_on_tetrahedron(pts):
    """Closest point of the tetra to the origin, or (None, None) if the origin
    is strictly inside. A flat tetrahedron never contains the origin and is
    resolved over its faces (degenerate simplices are common when the
    Minkowski boundary has flat facets)."""
    a0, b0, c0, d0 = pts
    volume = float(np.cross(b0 - a0, c0 - a0) @ (d0 - a0))
    degenerate = abs(volume) < 1e-12

    best = None
    best_dist = np.inf
    best_subset = None
    inside = True
    for i, j, k, opp in _TETRA_FACES:
        a, b, c = pts[i], pts[j], pts[k]
        if not degenerate:
            n = np.cross(b - a, c - a)
            side_origin = float(-a @ n)
            side_opp = float((pts[opp] - a) @ n)
            if side_origin * side_opp >= 0.0:
                continue  # origin on the inner side of this face
        inside = False
        point, sub = _closest_on_triangle([a, b, c])
        dist = float(point @ point)
        if dist < best_dist:
            best_dist = dist
            best = point
            best_subset = [(i, j, k)[s] for s in sub]
    if degenerate and best is None:
        # all faces are zero-area slivers: collapse to the best edge pair
        point, sub = _closest_on_triangle([a0, b0, c0])
        return point, sub
    if inside:
        return None, None
    return best, best_subset


def _closest_on_simplex(pts):
    if len(pts) == 1:
        return pts[0], [0]
    if len(pts) == 2:
        return _closest_on_segment(pts)
    if len(pts) == 3:
        return _closest_on_triangle(pts)
    return _closest_on_tetrahedron(pts)


def _gjk(support, initial_dir) -> tuple[float, list[np.ndarray], bool]:
    """Distance from the origin to the convex set sampled by `support`.
    Returns (distance, final simplex, intersecting)."""
    v = support(initial_dir)
    simplex = [v]
    for _ in range(GJK_MAX_ITERATIONS):
        dist2 = float(v @ v)
        if dist2 < 1e-20:
            return 0.0, simplex, True
        w = support(-v)
        # no measurable progress toward the origin: converged
        if dist2 - float(v @ w) <= GJK_PROGRESS_TOL + 1e-10 * dist2:
            return float(np.sqrt(dist2)), simplex, False
        if any(float((w - s) @ (w - s)) < 1e-24 for s in simplex):
            return float(np.sqrt(dist2)), simplex, False
        simplex.append(w)
        point, subset = _closest_on_simplex(simplex)
        if point is None:
            return 0.0, simplex, True
        simplex = [simplex[i] for i in subset]
        v = point
    return float(np.linalg.norm(v)), simplex, False


def _initial_polytope(support):
    """Deduplicated support points along the six axis directions; their hull
    strictly contains the origin whenever the shapes strictly overlap."""
    dirs = [
        np.array([1.0, 0.0, 0.0]),
        np.array([-1.0, 0.0, 0.0]),
        np.array([0.0, 1.0, 0.0]),
        np.array([0.0, -1.0, 0.0]),
        np.array([0.0, 0.0, 1.0]),
        np.array([0.0, 0.0, -1.0]),
    ]
    pts = []
    for d in dirs:
        w = support(d)
        if not any(float((w - q) @ (w - q)) < 1e-24 for q in pts):
            pts.append(w)
    return pts


def _epa(support, simplex) -> float:
    """Penetration depth via the expanding polytope.

    The polytope is rebuilt incrementally from axis-direction support points
    (the GJK terminal simplex can be flat with the origin on its boundary),
    with faces oriented away from the polytope centroid. Incremental insertion
    keeps the face set watertight even when the Minkowski boundary has flat
    facets that would make several support points coplanar."""
    pts = _initial_polytope(support)
    tetra = _pick_tetrahedron(pts)
    if tetra is None:
        return 0.0  # all support samples (near-)coplanar: degenerate contact
    centroid = np.mean([pts[i] for i in tetra], axis=0)

    def face_record(i, j, k):
        a, b, c = pts[i], pts[j], pts[k]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm < 1e-18:
            return None
        n = n / norm
        if float(n @ (a - centroid)) < 0.0:
            n = -n
            j, k = k, j
        return (float(n @ a), n, (i, j, k))

    faces = []
    for fi in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        f = face_record(tetra[fi[0]], tetra[fi[1]], tetra[fi[2]])
        if f is not None:
            faces.append(f)
    if len(faces) < 4:
        return 0.0

    def insert(w_idx: int) -> bool:
        nonlocal faces
        w = pts[w_idx]
        visible = [f for f in faces if float(f[1] @ (w - pts[f[2][0]])) > 1e-10]
        if not visible:
            return False
        visible_ids = {id(f) for f in visible}
        kept = [f for f in faces if id(f) not in visible_ids]
        edge_count: dict[tuple[int, int], int] = {}
        for _, _, tri in visible:
            for e in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(e), max(e))
                edge_count[key] = edge_count.get(key, 0) + 1
        for (a_idx, b_idx), count in edge_count.items():
            if count != 1:
                continue
            f = face_record(a_idx, b_idx, w_idx)
            if f is not None:
                kept.append(f)
        faces = kept
        return True

    # fold the remaining initial support points into the hull
    for idx in range(len(pts)):
        if idx not in tetra:
            insert(idx)

    for _ in range(EPA_MAX_ITERATIONS):
        faces.sort(key=lambda f: f[0])
        if not faces:
            return 0.0
        d, n, _tri = faces[0]
        w = support(n)
        growth = float(n @ w) - d
        if growth <= EPA_GROWTH_TOL:
            return max(d, 0.0)
        pts.append(w)
        if not insert(len(pts) - 1):
            return max(d, 0.0)
    faces.sort(key=lambda f: f[0])
    return max(faces[0][0], 0.0)


def _pick_tetrahedron(pts) -> tuple[int, int, int, int] | None:
    """Indices of four affinely independent points, or None."""
    m = len(pts)
    best = None
    best_volume = 1e-12
    for i in range(m):
        for j in range(i + 1, m):
            for k in range(j + 1, m):
                for l in range(k + 1, m):
                    vol = abs(
                        float(
                            np.cross(pts[j] - pts[i], pts[k] - pts[i]) @ (pts[l] - pts[i])
                        )
                    )
                    if vol > best_volume:
                        best_volume = vol
                        best = (i, j, k, l)
    return best


def _minkowski_support(a: Shape, pose_a: Pose, b: Shape, pose_b: Pose):
    def support(d):
        return world_support(a, pose_a, d) - world_support(b, pose_b, -d)

    return support


# ---------------------------------------------------------------------------
# public distance query

def shape_distance(a: Shape, pose_a: Pose, b: Shape, pose_b: Pose) -> float:
    """Signed distance: positive separation, negative penetration depth."""
    if isinstance(a, Sphere):
        if isinstance(b, Sphere):
            return float(np.linalg.norm(pose_a.position - pose_b.position)) - a.radius - b.radius
        if isinstance(b, Capsule):
            p0, p1 = b.world_segment(pose_b)
            return _point_segment_distance(pose_a.position, p0, p1) - a.radius - b.radius
        if isinstance(b, Box):
            return _sphere_box_distance(pose_a.position, a, b, pose_b)
    if isinstance(a, Capsule):
        if isinstance(b, Sphere):
            return shape_distance(b, pose_b, a, pose_a)
        if isinstance(b, Capsule):
            a0, a1 = a.world_segment(pose_a)
            b0, b1 = b.world_segment(pose_b)
            return _segment_segment_distance(a0, a1, b0, b1) - a.radius - b.radius
    if isinstance(a, Box) and isinstance(b, Sphere):
        return shape_distance(b, pose_b, a, pose_a)

    support = _minkowski_support(a, pose_a, b, pose_b)
    initial = pose_b.position - pose_a.position
    if float(initial @ initial) < 1e-18:
        initial = np.array([1.0, 0.0, 0.0])
    dist, simplex, hit = _gjk(support, initial)
    if not hit:
        return dist
    return -_epa(support, simplex)


def _is_analytic(a: Shape, b: Shape) -> bool:
    if a.kind == "sphere":
        return b.kind in ("sphere", "capsule", "box")
    if b.kind == "sphere":
        return a.kind in ("capsule", "box")
    return a.kind == "capsule" and b.kind == "capsule"


def shapes_closer_than(a: Shape, pose_a: Pose, b: Shape, pose_b: Pose, margin: float) -> bool:
    """True iff signed distance < margin; cheaper than shape_distance for
    intersecting GJK pairs because EPA is skipped."""
    centers = float(np.linalg.norm(pose_a.position - pose_b.position))
    if centers - a.bounding_radius() - b.bounding_radius() >= margin:
        return False
    if _is_analytic(a, b):
        return shape_distance(a, pose_a, b, pose_b) < margin
    support = _minkowski_support(a, pose_a, b, pose_b)
    initial = pose_b.position - pose_a.position
    if float(initial @ initial) < 1e-18:
        initial = np.array([1.0, 0.0, 0.0])
    dist, _, hit = _gjk(support, initial)
    return True if hit else dist < margin


# ---------------------------------------------------------------------------
# robot-level queries

@dataclass(frozen=True)
class Contact:
    first: str
    second: str
    penetration_depth: float


@dataclass(frozen=True)
class CollisionReport:
    in_collision: bool
    contacts: tuple[Contact, ...]
    min_clearance: float

    def to_dict(self) -> dict:
        return {
            "in_collision": self.in_collision,
            "contacts": [
                {"first": c.first, "second": c.second, "penetration_depth": c.penetration_depth}
                for c in self.contacts
            ],
            "min_clearance": self.min_clearance,
        }


@lru_cache(maxsize=16)
def _self_collision_pairs(model: RobotModel) -> tuple[tuple[str, str], ...]:
    """Link pairs eligible for self-collision checks. Links joined by fixed
    joints form one rigid body; bodies connected by a joint are adjacent and
    always skipped (contact at the joint is inevitable)."""
    body: dict[str, str] = {l.name: l.name for l in model.links}

    def find(x):
        while body[x] != x:
            body[x] = body[body[x]]
            x = body[x]
        return x

    for j in model.joints:
        if j.type == "fixed":
            body[find(j.parent)] = find(j.child)
    adjacent = set()
    for j in model.joints:
        if j.type != "fixed":
            adjacent.add(frozenset((find(j.parent), find(j.child))))
    with_geom = [l.name for l in model.links if l.collision_geometries]
    pairs = []
    for i, la in enumerate(with_geom):
        for lb in with_geom[i + 1 :]:
            ba, bb = find(la), find(lb)
            if ba == bb or frozenset((ba, bb)) in adjacent:
                continue
            pairs.append((la, lb))
    return tuple(pairs)


def _link_geometries(model, poses):
    out = []
    for link in model.links:
        link_pose = poses.get(link.name)
        if link_pose is None:
            continue
        for shape, offset in link.collision_geometries:
            out.append((link.name, shape, link_pose.compose(offset)))
    return out


def robot_in_collision(
    model: RobotModel,
    group: str,
    q,
    objects,
    *,
    self_collision: bool = False,
    padding: float = 0.0,
) -> CollisionReport:
    """Full collision report of the robot at q against the scene objects.

    Distances have `padding` subtracted, so padding > 0 is conservative.
    min_clearance is the smallest padded distance over all checked pairs
    (infinity when nothing was checked); negative while in collision.
    """
    q = _as_positions(model, group, q)
    poses = link_poses_full(model, group, q)
    geoms = _link_geometries(model, poses)

    contacts = []
    min_clearance = np.inf
    for link_name, shape, pose in geoms:
        for obj in objects:
            d = shape_distance(shape, pose, obj.shape, obj.pose) - padding
            min_clearance = min(min_clearance, d)
            if d < 0.0:
                contacts.append(Contact(link_name, obj.id, -d))
    if self_collision:
        by_link: dict[str, list] = {}
        for link_name, shape, pose in geoms:
            by_link.setdefault(link_name, []).append((shape, pose))
        for la, lb in _self_collision_pairs(model):
            for sa, pa in by_link.get(la, ()):
                for sb, pb in by_link.get(lb, ()):
                    d = shape_distance(sa, pa, sb, pb) - padding
                    min_clearance = min(min_clearance, d)
                    if d < 0.0:
                        contacts.append(Contact(la, lb, -d))
    return CollisionReport(
        in_collision=bool(contacts), contacts=tuple(contacts), min_clearance=float(min_clearance)
    )


def _aabb_gap(a, b) -> float:
    lo_a, hi_a = a
    lo_b, hi_b = b
    g = np.maximum(np.maximum(lo_a - hi_b, lo_b - hi_a), 0.0)
    return float(np.linalg.norm(g))


class CollisionChecker:
    """Reusable validity oracle over a fixed object set: AABB broad phase, then
    the narrow-phase boolean query. Planners share one instance per scene
    snapshot; it is read-only after construction and safe to use from several
    workers."""

    def __init__(
        self,
        model: RobotModel,
        group: str,
        objects,
        *,
        self_collision: bool = False,
        padding: float = 0.0,
    ):
        self.model = model
        self.group = group
        self.objects = list(objects)
        self.padding = float(padding)
        self.space = JointSpace(model, group)
        self._obj_aabbs = [shape_aabb(o.shape, o.pose) for o in self.objects]
        self._self_pairs = _self_collision_pairs(model) if self_collision else ()

    def state_in_collision(self, q) -> bool:
        poses = link_poses_full(self.model, self.group, q)
        geoms = _link_geometries(self.model, poses)
        pad = self.padding
        for _, shape, pose in geoms:
            aabb = shape_aabb(shape, pose)
            for obj, obj_aabb in zip(self.objects, self._obj_aabbs):
                if _aabb_gap(aabb, obj_aabb) > pad:
                    continue
                if shapes_closer_than(shape, pose, obj.shape, obj.pose, pad):
                    return True
        if self._self_pairs:
            by_link: dict[str, list] = {}
            for link_name, shape, pose in geoms:
                by_link.setdefault(link_name, []).append((shape, pose))
            for la, lb in self._self_pairs:
                for sa, pa in by_link.get(la, ()):
                    for sb, pb in by_link.get(lb, ()):
                        if shapes_closer_than(sa, pa, sb, pb, pad):
                            return True
        return False

    def state_valid(self, q) -> bool:
        return not self.state_in_collision(q)

    def edge_valid(self, q_a, q_b, step: float = DEFAULT_EDGE_STEP) -> bool:
        if step <= 0.0:
            raise ValueError("step must be positive")
        q_a = _as_positions(self.model, self.group, q_a)
        q_b = _as_positions(self.model, self.group, q_b)
        max_delta = float(np.max(np.abs(self.space.difference(q_a, q_b)))) if self.space.n else 0.0
        n = 1
        while max_delta / n > step:
            n *= 2
        for t in _dyadic_steps(n):
            q = q_a if t == 0.0 else (q_b if t == 1.0 else self.space.interpolate(q_a, q_b, t))
            if self.state_in_collision(q):
                return False
        return True


def state_in_collision(
    model: RobotModel,
    group: str,
    q,
    objects,
    *,
    self_collision: bool = False,
    padding: float = 0.0,
) -> bool:
    """Boolean fast path: first contact wins, EPA skipped."""
    checker = CollisionChecker(
        model, group, objects, self_collision=self_collision, padding=padding
    )
    return checker.state_in_collision(_as_positions(model, group, q))


def _dyadic_steps(n: int):
    """Yield k/n sample fractions, endpoints first, then midpoints by level."""
    yield 0.0
    yield 1.0
    level = 2
    while level <= n:
        for num in range(1, level, 2):
            yield num / level
        level *= 2


def segment_valid(
    model: RobotModel,
    group: str,
    q_a,
    q_b,
    objects,
    step: float = DEFAULT_EDGE_STEP,
    *,
    self_collision: bool = False,
    padding: float = 0.0,
) -> bool:
    """True iff every interpolated state along q_a -> q_b at joint-space
    resolution <= step is collision-free, endpoints included.

    The interior sample count is rounded up to a power of two so that a finer
    step always checks a superset of a coarser step's states (monotone in
    resolution). Continuous joints interpolate along the shortest arc.
    """
    checker = CollisionChecker(
        model, group, objects, self_collision=self_collision, padding=padding
    )
    return checker.edge_valid(q_a, q_b, step)
