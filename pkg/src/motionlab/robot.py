"""URDF parsing into a validated kinematic model.

Supported subset: link collision geometry (box / sphere / cylinder, meshes
degrade to their bounding box), joints of type revolute / prismatic /
continuous / fixed with origin, axis, and limits. Visual elements,
transmissions, sensors, and inertial data are ignored. Angles radians,
lengths meters.
"""

from __future__ import annotations

import io
import struct
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .shapes import Box, Capsule, Cylinder, InvalidShape, Shape, Sphere
from .transforms import Pose

AXIS_NORM_TOL = 1e-9
TWO_PI = 2.0 * np.pi

# URDF gives continuous joints no position limits and sometimes no limit
# element at all; planners still need a velocity bound.
DEFAULT_CONTINUOUS_VELOCITY = np.pi


class UrdfError(Exception):
    """Base class for model construction failures."""


class MalformedXml(UrdfError):
    pass


class KinematicLoop(UrdfError):
    """Links and joints do not form a single tree."""


class MissingLimit(UrdfError):
    pass


class DanglingReference(UrdfError):
    """A joint names a parent or child link that does not exist."""


class UnknownGroup(KeyError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class JointLimits:
    lower: float | None
    upper: float | None
    max_velocity: float


@dataclass(frozen=True, eq=False)
class Joint:
    name: str
    type: str  # revolute | prismatic | continuous | fixed
    parent: str
    child: str
    origin: Pose
    axis: np.ndarray
    limits: JointLimits | None

    @property
    def is_actuated(self) -> bool:
        return self.type != "fixed"


@dataclass(frozen=True, eq=False)
class Link:
    name: str
    collision_geometries: tuple[tuple[Shape, Pose], ...] = ()


@dataclass(frozen=True)
class Group:
    """An ordered joint chain from base_link to tip_link. `chain` lists every
    joint on the path including fixed ones; `joints` only the actuated ones."""

    name: str
    base_link: str
    tip_link: str
    chain: tuple[str, ...]
    joints: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class JointState:
    group: str
    positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float).reshape(-1))

    def to_dict(self) -> dict:
        return {"group": self.group, "positions": [float(v) for v in self.positions]}

    @staticmethod
    def from_dict(d: dict) -> "JointState":
        return JointState(group=d["group"], positions=d["positions"])


@dataclass(frozen=True, eq=False)
class RobotModel:
    name: str
    links: tuple[Link, ...]
    joints: tuple[Joint, ...]
    root_link: str
    groups: dict[str, Group]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_links_by_name", {l.name: l for l in self.links})
        object.__setattr__(self, "_joints_by_name", {j.name: j for j in self.joints})

    def link(self, name: str) -> Link:
        return self._links_by_name[name]

    def joint(self, name: str) -> Joint:
        return self._joints_by_name[name]

    def group(self, name: str) -> Group:
        try:
            return self.groups[name]
        except KeyError:
            raise UnknownGroup(name) from None

    def to_dict(self) -> dict:
        from .shapes import shape_to_dict

        return {
            "name": self.name,
            "root_link": self.root_link,
            "links": [
                {
                    "name": l.name,
                    "collision_geometries": [
                        {"shape": shape_to_dict(s), "origin": p.to_dict()}
                        for s, p in l.collision_geometries
                    ],
                }
                for l in self.links
            ],
            "joints": [
                {
                    "name": j.name,
                    "type": j.type,
                    "parent": j.parent,
                    "child": j.child,
                    "origin": j.origin.to_dict(),
                    "axis": [float(v) for v in j.axis],
                    "limits": None
                    if j.limits is None
                    else {
                        "lower": j.limits.lower,
                        "upper": j.limits.upper,
                        "max_velocity": j.limits.max_velocity,
                    },
                }
                for j in self.joints
            ],
            "groups": {
                g.name: {
                    "base_link": g.base_link,
                    "tip_link": g.tip_link,
                    "chain": list(g.chain),
                    "joints": list(g.joints),
                }
                for g in self.groups.values()
            },
        }


def _parse_floats(text: str, n: int, what: str) -> np.ndarray:
    try:
        values = np.array([float(v) for v in text.split()])
    except ValueError:
        raise MalformedXml(f"cannot parse {what}: {text!r}") from None
    if values.shape != (n,):
        raise MalformedXml(f"{what} needs {n} values, got {text!r}")
    return values


def _parse_origin(elem) -> Pose:
    if elem is None:
        return Pose.identity()
    xyz = _parse_floats(elem.get("xyz", "0 0 0"), 3, "origin xyz")
    rpy = _parse_floats(elem.get("rpy", "0 0 0"), 3, "origin rpy")
    return Pose.from_xyz_rpy(xyz, rpy)


def _stl_bounding_box(path: Path) -> tuple[np.ndarray, np.ndarray] | None:
    """Vertex bounds of a binary or ascii STL file; None on any trouble."""
    try:
        raw = path.read_bytes()
    except OSError:
        return None
    try:
        if raw[:5].lower() == b"solid" and b"facet" in raw[:500]:
            verts = []
            for line in io.StringIO(raw.decode("ascii", "ignore")):
                parts = line.split()
                if len(parts) == 4 and parts[0] == "vertex":
                    verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            if not verts:
                return None
            arr = np.array(verts)
        else:
            (count,) = struct.unpack_from("<I", raw, 80)
            if len(raw) < 84 + count * 50:
                return None
            tri = np.frombuffer(raw, dtype=np.uint8, count=count * 50, offset=84)
            tri = tri.reshape(count, 50)[:, 12:48].copy().view("<f4").reshape(count * 3, 3)
            arr = tri.astype(float)
        return arr.min(axis=0), arr.max(axis=0)
    except (ValueError, struct.error):
        return None


def _mesh_fallback(mesh_elem, mesh_dir: Path | None, link_name: str, warnings: list[str]):
    """Replace a mesh collision element by the axis-aligned box bounding its
    vertices. Returns (shape, center offset) or None if the file is unusable."""
    filename = mesh_elem.get("filename", "")
    scale = np.ones(3)
    if mesh_elem.get("scale"):
        scale = _parse_floats(mesh_elem.get("scale"), 3, "mesh scale")
    bounds = None
    if mesh_dir is not None and filename:
        candidate = mesh_dir / filename.removeprefix("file://")
        bounds = _stl_bounding_box(candidate)
    if bounds is None:
        warnings.append(f"link {link_name!r}: mesh collision {filename!r} could not be read; geometry dropped")
        return None
    lo, hi = bounds[0] * scale, bounds[1] * scale
    half = (hi - lo) / 2.0
    half = np.maximum(half, 1e-6)
    warnings.append(f"link {link_name!r}: mesh collision {filename!r} replaced by its bounding box")
    return Box(half_extents=tuple(half)), (lo + hi) / 2.0


def _parse_collision_geometry(link_elem, link_name, cylinders_as_capsules, mesh_dir, warnings):
    geoms = []
    for coll in link_elem.findall("collision"):
        origin = _parse_origin(coll.find("origin"))
        geo = coll.find("geometry")
        if geo is None:
            raise MalformedXml(f"link {link_name!r}: collision without geometry")
        shape = None
        try:
            if (box := geo.find("box")) is not None:
                size = _parse_floats(box.get("size", ""), 3, "box size")
                shape = Box(half_extents=tuple(size / 2.0))
            elif (sph := geo.find("sphere")) is not None:
                shape = Sphere(radius=float(sph.get("radius", "0")))
            elif (cyl := geo.find("cylinder")) is not None:
                radius = float(cyl.get("radius", "0"))
                half = float(cyl.get("length", "0")) / 2.0
                cls = Capsule if cylinders_as_capsules else Cylinder
                shape = cls(radius=radius, half_length=half)
            elif (mesh := geo.find("mesh")) is not None:
                result = _mesh_fallback(mesh, mesh_dir, link_name, warnings)
                if result is not None:
                    shape, center = result
                    origin = origin.compose(Pose(position=center))
            else:
                raise MalformedXml(f"link {link_name!r}: empty geometry element")
        except InvalidShape as exc:
            raise MalformedXml(f"link {link_name!r}: {exc}") from None
        except ValueError as exc:
            raise MalformedXml(f"link {link_name!r}: {exc}") from None
        if shape is not None:
            geoms.append((shape, origin))
    return tuple(geoms)


def _parse_joint_limits(joint_elem, name, jtype, warnings) -> JointLimits | None:
    if jtype == "fixed":
        return None
    limit = joint_elem.find("limit")
    if jtype == "continuous":
        velocity = DEFAULT_CONTINUOUS_VELOCITY
        if limit is not None and limit.get("velocity") is not None:
            velocity = float(limit.get("velocity"))
        else:
            warnings.append(f"joint {name!r}: continuous joint without velocity limit, defaulting")
        if velocity <= 0.0:
            raise MissingLimit(f"joint {name!r}: velocity limit must be positive")
        return JointLimits(lower=None, upper=None, max_velocity=velocity)
    if limit is None:
        raise MissingLimit(f"{jtype} joint {name!r} has no limit element")
    try:
        lower = float(limit.get("lower"))
        upper = float(limit.get("upper"))
        velocity = float(limit.get("velocity"))
    except (TypeError, ValueError):
        raise MissingLimit(f"joint {name!r}: limit needs numeric lower, upper, velocity") from None
    if lower > upper:
        raise MissingLimit(f"joint {name!r}: lower {lower} > upper {upper}")
    if velocity <= 0.0:
        raise MissingLimit(f"joint {name!r}: velocity limit must be positive")
    return JointLimits(lower=lower, upper=upper, max_velocity=velocity)


def parse_urdf(
    xml_text: str,
    *,
    cylinders_as_capsules: bool = False,
    mesh_dir: str | Path | None = None,
) -> RobotModel:
    """Parse URDF text into a RobotModel.

    cylinders_as_capsules treats collision cylinders as capsules of the same
    radius and length (conservative, and capsule distance is analytic).
    mesh_dir resolves relative mesh filenames when degrading meshes to boxes.

    Raises MalformedXml, DanglingReference, KinematicLoop, or MissingLimit.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from None
    if root.tag != "robot":
        raise MalformedXml(f"expected <robot> root element, got <{root.tag}>")
    name = root.get("name", "robot")
    warnings: list[str] = []
    mesh_base = Path(mesh_dir) if mesh_dir is not None else None

    links: list[Link] = []
    seen_links: set[str] = set()
    for link_elem in root.findall("link"):
        link_name = link_elem.get("name")
        if not link_name:
            raise MalformedXml("link without a name")
        if link_name in seen_links:
            raise MalformedXml(f"duplicate link name {link_name!r}")
        seen_links.add(link_name)
        geoms = _parse_collision_geometry(link_elem, link_name, cylinders_as_capsules, mesh_base, warnings)
        links.append(Link(name=link_name, collision_geometries=geoms))

    joints: list[Joint] = []
    seen_joints: set[str] = set()
    for joint_elem in root.findall("joint"):
        jname = joint_elem.get("name")
        jtype = joint_elem.get("type")
        if not jname:
            raise MalformedXml("joint without a name")
        if jname in seen_joints:
            raise MalformedXml(f"duplicate joint name {jname!r}")
        seen_joints.add(jname)
        if jtype not in ("revolute", "prismatic", "continuous", "fixed"):
            raise MalformedXml(f"joint {jname!r}: unsupported type {jtype!r}")
        parent_elem = joint_elem.find("parent")
        child_elem = joint_elem.find("child")
        if parent_elem is None or child_elem is None:
            raise MalformedXml(f"joint {jname!r}: missing parent or child")
        parent = parent_elem.get("link")
        child = child_elem.get("link")
        for ref in (parent, child):
            if ref not in seen_links:
                raise DanglingReference(f"joint {jname!r} references unknown link {ref!r}")
        axis_elem = joint_elem.find("axis")
        axis = np.array([1.0, 0.0, 0.0])  # URDF default
        if axis_elem is not None:
            axis = _parse_floats(axis_elem.get("xyz", ""), 3, f"joint {jname!r} axis")
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            raise MalformedXml(f"joint {jname!r}: zero axis")
        if abs(norm - 1.0) > AXIS_NORM_TOL:
            axis = axis / norm
        joints.append(
            Joint(
                name=jname,
                type=jtype,
                parent=parent,
                child=child,
                origin=_parse_origin(joint_elem.find("origin")),
                axis=axis,
                limits=_parse_joint_limits(joint_elem, jname, jtype, warnings),
            )
        )

    root_link = _validate_tree(links, joints)
    groups = {"default": _default_group(links, joints, root_link)}
    return RobotModel(
        name=name,
        links=tuple(links),
        joints=tuple(joints),
        root_link=root_link,
        groups=groups,
        warnings=tuple(warnings),
    )


def parse_urdf_file(path: str | Path, **kwargs) -> RobotModel:
    path = Path(path)
    kwargs.setdefault("mesh_dir", path.parent)
    return parse_urdf(path.read_text(), **kwargs)


def _validate_tree(links: list[Link], joints: list[Joint]) -> str:
    child_counts: dict[str, int] = {}
    for j in joints:
        child_counts[j.child] = child_counts.get(j.child, 0) + 1
    for child, count in child_counts.items():
        if count > 1:
            raise KinematicLoop(f"link {child!r} is the child of {count} joints")
    roots = [l.name for l in links if l.name not in child_counts]
    if not roots:
        raise KinematicLoop("no root link: the joint graph contains a cycle")
    if len(roots) > 1:
        raise KinematicLoop(f"multiple root links: {roots}")
    root = roots[0]

    children: dict[str, list[Joint]] = {}
    for j in joints:
        children.setdefault(j.parent, []).append(j)
    reached = {root}
    stack = [root]
    while stack:
        link = stack.pop()
        for j in children.get(link, ()):
            if j.child in reached:
                raise KinematicLoop(f"link {j.child!r} reached twice")
            reached.add(j.child)
            stack.append(j.child)
    orphans = [l.name for l in links if l.name not in reached]
    if orphans:
        raise KinematicLoop(f"links not connected to the tree: {orphans}")
    return root


def _default_group(links: list[Link], joints: list[Joint], root: str) -> Group:
    """Chain from the root to the deepest tip (joint count; document order on
    ties). URDF has no group element, so one is always synthesized."""
    parent_joint: dict[str, Joint] = {j.child: j for j in joints}
    depth: dict[str, int] = {}

    def link_depth(link: str) -> int:
        if link in depth:
            return depth[link]
        d = 0 if link not in parent_joint else link_depth(parent_joint[link].parent) + 1
        depth[link] = d
        return d

    best = root
    for l in links:
        if link_depth(l.name) > depth.get(best, 0):
            best = l.name
    chain: list[str] = []
    link = best
    while link != root:
        j = parent_joint[link]
        chain.append(j.name)
        link = j.parent
    chain.reverse()
    joints_by_name = {j.name: j for j in joints}
    actuated = tuple(n for n in chain if joints_by_name[n].is_actuated)
    return Group(name="default", base_link=root, tip_link=best, chain=tuple(chain), joints=actuated)


def joint_chain(model: RobotModel, group: str, *, include_fixed: bool = False) -> list[Joint]:
    """Joints of a group in base-to-tip order. By default only actuated joints;
    include_fixed interleaves the fixed transforms as well."""
    g = model.group(group)
    names = g.chain if include_fixed else g.joints
    return [model.joint(n) for n in names]


def _as_positions(model: RobotModel, group: str, q) -> np.ndarray:
    if isinstance(q, JointState):
        q = q.positions
    q = np.asarray(q, dtype=float).reshape(-1)
    n = len(model.group(group).joints)
    if q.shape != (n,):
        raise DimensionMismatch(f"group {group!r} has {n} joints, got {q.shape[0]} values")
    return q


def wrap_angle(q):
    """Wrap into (-pi, pi]. Values already in range are returned unchanged so
    wrapping is exactly idempotent."""
    q = np.asarray(q, dtype=float)
    out = np.where((q > np.pi) | (q <= -np.pi), np.pi - np.mod(np.pi - q, TWO_PI), q)
    return out if out.ndim else float(out)


def clamp_to_limits(model: RobotModel, group: str, q) -> np.ndarray:
    """Clamp each coordinate into its joint's [lower, upper]; continuous joints
    wrap into (-pi, pi]."""
    q = _as_positions(model, group, q).copy()
    for i, joint in enumerate(joint_chain(model, group)):
        if joint.type == "continuous":
            q[i] = wrap_angle(q[i])
        else:
            q[i] = min(max(q[i], joint.limits.lower), joint.limits.upper)
    return q


class JointSpace:
    """Joint-space bounds and metric for a group: Euclidean distance with
    continuous joints measured on the shortest arc."""

    def __init__(self, model: RobotModel, group: str):
        chain = joint_chain(model, group)
        self.model = model
        self.group = group
        self.n = len(chain)
        self.wraps = np.array([j.type == "continuous" for j in chain])
        self.lower = np.array([-np.pi if j.type == "continuous" else j.limits.lower for j in chain])
        self.upper = np.array([np.pi if j.type == "continuous" else j.limits.upper for j in chain])
        self.max_velocity = np.array([j.limits.max_velocity for j in chain])

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)

    def difference(self, q_from: np.ndarray, q_to: np.ndarray) -> np.ndarray:
        d = np.asarray(q_to, dtype=float) - np.asarray(q_from, dtype=float)
        if self.wraps.any():
            d = np.where(self.wraps, wrap_angle(d), d)
        return d

    def distance(self, q_a: np.ndarray, q_b: np.ndarray) -> float:
        return float(np.linalg.norm(self.difference(q_a, q_b)))

    def interpolate(self, q_a: np.ndarray, q_b: np.ndarray, t: float) -> np.ndarray:
        q = np.asarray(q_a, dtype=float) + t * self.difference(q_a, q_b)
        if self.wraps.any():
            q = np.where(self.wraps, wrap_angle(q), q)
        return q

    def clamp(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        wrapped = wrap_angle(q) if self.wraps.any() else q
        return np.where(self.wraps, wrapped, np.clip(q, self.lower, self.upper))


@lru_cache(maxsize=64)
def joint_space(model: RobotModel, group: str) -> JointSpace:
    """Cached JointSpace per (model, group); the instance is read-only."""
    return JointSpace(model, group)


def serialize_urdf(model: RobotModel) -> str:
    """Emit the model back as URDF. Capsules serialize as cylinders (URDF has
    no capsule element); the kinematic tree round-trips isomorphically."""
    robot = ET.Element("robot", name=model.name)
    for link in model.links:
        link_elem = ET.SubElement(robot, "link", name=link.name)
        for shape, origin in link.collision_geometries:
            coll = ET.SubElement(link_elem, "collision")
            _emit_origin(coll, origin)
            geo = ET.SubElement(coll, "geometry")
            if isinstance(shape, Box):
                ET.SubElement(geo, "box", size=" ".join(repr(float(2.0 * v)) for v in shape.half_extents))
            elif isinstance(shape, Sphere):
                ET.SubElement(geo, "sphere", radius=repr(float(shape.radius)))
            else:
                ET.SubElement(
                    geo, "cylinder", radius=repr(float(shape.radius)), length=repr(float(2.0 * shape.half_length))
                )
    for joint in model.joints:
        j = ET.SubElement(robot, "joint", name=joint.name, type=joint.type)
        _emit_origin(j, joint.origin)
        ET.SubElement(j, "parent", link=joint.parent)
        ET.SubElement(j, "child", link=joint.child)
        ET.SubElement(j, "axis", xyz=" ".join(repr(float(v)) for v in joint.axis))
        if joint.limits is not None:
            attrs = {"velocity": repr(float(joint.limits.max_velocity))}
            if joint.limits.lower is not None:
                attrs["lower"] = repr(float(joint.limits.lower))
                attrs["upper"] = repr(float(joint.limits.upper))
            ET.SubElement(j, "limit", **attrs)
    return ET.tostring(robot, encoding="unicode")


def _emit_origin(parent, pose: Pose):
    # rpy recovered from the quaternion; good enough for round-trip tests
    r = pose.rotation_matrix()
    pitch = np.arctan2(-r[2, 0], np.hypot(r[0, 0], r[1, 0]))
    if abs(abs(pitch) - np.pi / 2) < 1e-9:
        roll = 0.0
        yaw = np.arctan2(-r[0, 1], r[1, 1]) * (1.0 if pitch > 0 else -1.0)
    else:
        roll = np.arctan2(r[2, 1], r[2, 2])
        yaw = np.arctan2(r[1, 0], r[0, 0])
    ET.SubElement(
        parent,
        "origin",
        xyz=" ".join(repr(float(v)) for v in pose.position),
        rpy=f"{float(roll)!r} {float(pitch)!r} {float(yaw)!r}",
    )


def tree_signature(model: RobotModel):
    """Structure of the kinematic tree, for isomorphism comparisons."""
    return (
        model.root_link,
        tuple(sorted(l.name for l in model.links)),
        tuple(sorted((j.name, j.type, j.parent, j.child) for j in model.joints)),
    )
