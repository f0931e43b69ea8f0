// three.js rendering layer: scene objects, the four robot ghosts, the
// transform gizmo, selection highlighting, and ground picking.

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";
import { TransformControls } from "three/addons/controls/TransformControls.js";

import type { RobotGhost, ViewerPort } from "./app";
import { IDENTITY, PoseData, Vec3 } from "./math";
import type { ObjectData, ShapeData } from "./protocol";
import type { SceneReplica } from "./replica";
import { RobotModel } from "./robot";

const GHOST_COLORS: Record<RobotGhost, number> = {
  live: 0x8899aa,
  start: 0x2ecc71, // green
  goal: 0xe67e22, // orange
  preview: 0x00c8dc, // cyan
};

function toThreeQuat(q: [number, number, number, number]): THREE.Quaternion {
  return new THREE.Quaternion(q[1], q[2], q[3], q[0]);
}

function applyPose(object: THREE.Object3D, pose: PoseData): void {
  object.position.set(...pose.position);
  object.quaternion.copy(toThreeQuat(pose.orientation));
}

function shapeGeometry(shape: ShapeData): THREE.BufferGeometry {
  switch (shape.kind) {
    case "box": {
      const [hx, hy, hz] = shape.half_extents!;
      return new THREE.BoxGeometry(2 * hx, 2 * hy, 2 * hz);
    }
    case "sphere":
      return new THREE.SphereGeometry(shape.radius!, 24, 16);
    case "cylinder": {
      const geometry = new THREE.CylinderGeometry(
        shape.radius!, shape.radius!, 2 * shape.half_length!, 24,
      );
      geometry.rotateX(Math.PI / 2); // our cylinders run along local z
      return geometry;
    }
    case "capsule": {
      const geometry = new THREE.CapsuleGeometry(shape.radius!, 2 * shape.half_length!, 6, 16);
      geometry.rotateX(Math.PI / 2);
      return geometry;
    }
  }
}

class RobotGhostView {
  root = new THREE.Group();
  private linkNodes = new Map<string, THREE.Group>();

  constructor(private model: RobotModel, color: number, opacity: number) {
    const material = new THREE.MeshStandardMaterial({
      color,
      transparent: opacity < 1,
      opacity,
      roughness: 0.6,
    });
    const group = model.group("default");
    const links = new Set<string>([group.base_link]);
    for (const name of group.chain) links.add(model.joint(name).child);
    for (const link of links) {
      const node = new THREE.Group();
      for (const geom of model.linkGeometry(link)) {
        const mesh = new THREE.Mesh(shapeGeometry(geom.shape), material);
        applyPose(mesh, geom.origin);
        node.add(mesh);
      }
      this.linkNodes.set(link, node);
      this.root.add(node);
    }
  }

  setConfiguration(q: number[], base: PoseData): void {
    const { perLink } = this.model.forwardKinematics("default", q, base);
    for (const [link, pose] of perLink) {
      const node = this.linkNodes.get(link);
      if (node) applyPose(node, pose);
    }
  }

  tipPose(q: number[], base: PoseData): PoseData {
    return this.model.forwardKinematics("default", q, base).tip;
  }
}

export class ThreeViewer implements ViewerPort {
  scene = new THREE.Scene();
  camera: THREE.PerspectiveCamera;
  renderer: THREE.WebGLRenderer;
  orbit: OrbitControls;
  gizmo: TransformControls;

  private objectMeshes = new Map<string, THREE.Mesh>();
  private objectShapes = new Map<string, string>();
  private ghosts = new Map<RobotGhost, RobotGhostView>();
  private ghostConfigs = new Map<RobotGhost, number[] | null>();
  private robotBase: PoseData = IDENTITY;
  private ground: THREE.Mesh;
  private eeHandle: THREE.Mesh;
  private toastElement: HTMLElement | null;

  onDragMove: (id: string, pose: PoseData) => void = () => {};
  onDragEnd: (id: string, pose: PoseData) => void = () => {};
  onSelect: (id: string | null) => void = () => {};
  onGroundClick: (point: Vec3) => void = () => {};
  onEndEffectorDrag: (target: PoseData, released: boolean) => void = () => {};
  placingRobot = false;

  constructor(private model: RobotModel, container: HTMLElement, toastElement: HTMLElement | null) {
    this.toastElement = toastElement;
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.01, 100);
    this.camera.up.set(0, 0, 1); // world z-up, matching the robot convention
    this.camera.position.set(1.8, -1.8, 1.4);
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    container.appendChild(this.renderer.domElement);

    this.scene.background = new THREE.Color(0x10151c);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.6));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(2, -3, 4);
    this.scene.add(sun);

    const grid = new THREE.GridHelper(6, 24, 0x334455, 0x223344);
    grid.rotation.x = Math.PI / 2;
    this.scene.add(grid);
    this.ground = new THREE.Mesh(
      new THREE.PlaneGeometry(20, 20),
      new THREE.MeshBasicMaterial({ visible: false }),
    );
    this.scene.add(this.ground);

    this.orbit = new OrbitControls(this.camera, this.renderer.domElement);
    this.orbit.target.set(0.3, 0, 0.3);

    this.gizmo = new TransformControls(this.camera, this.renderer.domElement);
    this.gizmo.addEventListener("dragging-changed", (event: any) => {
      this.orbit.enabled = !event.value;
      const attached = this.gizmo.object as THREE.Object3D | undefined;
      if (!event.value && attached) {
        this.emitDrag(attached, true);
      }
    });
    this.gizmo.addEventListener("objectChange", () => {
      const attached = this.gizmo.object as THREE.Object3D | undefined;
      if (attached) this.emitDrag(attached, false);
    });
    this.scene.add(this.gizmo.getHelper ? this.gizmo.getHelper() : (this.gizmo as any));

    for (const ghost of ["start", "goal", "preview", "live"] as RobotGhost[]) {
      const view = new RobotGhostView(
        model, GHOST_COLORS[ghost], ghost === "live" ? 1.0 : 0.55,
      );
      view.root.visible = ghost === "live";
      this.ghosts.set(ghost, view);
      this.ghostConfigs.set(ghost, null);
      this.scene.add(view.root);
    }

    this.eeHandle = new THREE.Mesh(
      new THREE.SphereGeometry(0.03, 16, 12),
      new THREE.MeshStandardMaterial({ color: 0xffe066 }),
    );
    this.scene.add(this.eeHandle);

    this.renderer.domElement.addEventListener("pointerdown", (event) => this.pick(event));
    this.resize(container.clientWidth || 800, container.clientHeight || 600);
    window.addEventListener("resize", () =>
      this.resize(container.clientWidth || 800, container.clientHeight || 600),
    );
  }

  private emitDrag(object: THREE.Object3D, released: boolean): void {
    const pose: PoseData = {
      position: [object.position.x, object.position.y, object.position.z],
      orientation: [object.quaternion.w, object.quaternion.x, object.quaternion.y, object.quaternion.z],
    };
    if (object === this.eeHandle) {
      this.onEndEffectorDrag(pose, released);
      return;
    }
    const id = object.userData.objectId as string | undefined;
    if (!id) return;
    if (released) this.onDragEnd(id, pose);
    else this.onDragMove(id, pose);
  }

  private pick(event: PointerEvent): void {
    if ((this.gizmo as any).dragging) return;
    const rect = this.renderer.domElement.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1,
    );
    const raycaster = new THREE.Raycaster();
    raycaster.setFromCamera(ndc, this.camera);

    if (this.placingRobot) {
      const hit = raycaster.intersectObject(this.ground)[0];
      if (hit) this.onGroundClick([hit.point.x, hit.point.y, 0]);
      return;
    }

    const handleHit = raycaster.intersectObject(this.eeHandle)[0];
    if (handleHit) {
      this.gizmo.setMode("translate");
      this.gizmo.attach(this.eeHandle);
      return;
    }
    const meshes = [...this.objectMeshes.values()];
    const hit = raycaster.intersectObjects(meshes)[0];
    if (hit) {
      this.onSelect((hit.object as THREE.Mesh).userData.objectId as string);
    } else if (!raycaster.intersectObject(this.gizmo as unknown as THREE.Object3D).length) {
      this.onSelect(null);
    }
  }

  setGizmoMode(mode: "translate" | "rotate"): void {
    this.gizmo.setMode(mode);
  }

  resize(width: number, height: number): void {
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
    this.renderer.setSize(width, height);
  }

  render(): void {
    this.renderer.render(this.scene, this.camera);
  }

  // -- ViewerPort -------------------------------------------------------------

  syncObjects(replica: SceneReplica, selection: string | null): void {
    const seen = new Set<string>();
    for (const object of replica.objectList()) {
      seen.add(object.id);
      this.upsertObject(object, replica.displayedPose(object.id)!, selection === object.id);
    }
    for (const [id, mesh] of [...this.objectMeshes]) {
      if (!seen.has(id)) {
        if (this.gizmo.object === mesh) this.gizmo.detach();
        this.scene.remove(mesh);
        this.objectMeshes.delete(id);
        this.objectShapes.delete(id);
      }
    }
    if (selection) {
      const mesh = this.objectMeshes.get(selection);
      if (mesh && this.gizmo.object !== mesh) this.gizmo.attach(mesh);
    } else if (this.gizmo.object && this.gizmo.object !== this.eeHandle) {
      this.gizmo.detach();
    }
  }

  private upsertObject(object: ObjectData, pose: PoseData, selected: boolean): void {
    const shapeKey = JSON.stringify(object.shape);
    let mesh = this.objectMeshes.get(object.id);
    if (mesh && this.objectShapes.get(object.id) !== shapeKey) {
      this.scene.remove(mesh);
      mesh = undefined;
    }
    if (!mesh) {
      mesh = new THREE.Mesh(
        shapeGeometry(object.shape),
        new THREE.MeshStandardMaterial({ color: 0x8e7cc3, roughness: 0.7 }),
      );
      mesh.userData.objectId = object.id;
      this.objectMeshes.set(object.id, mesh);
      this.objectShapes.set(object.id, shapeKey);
      this.scene.add(mesh);
    }
    // selection is shown with a distinct highlight material
    const material = mesh.material as THREE.MeshStandardMaterial;
    material.emissive.setHex(selected ? 0x3355ff : 0x000000);
    material.emissiveIntensity = selected ? 0.6 : 0.0;
    if (this.gizmo.object !== mesh) applyPose(mesh, pose);
  }

  setRobotConfig(ghost: RobotGhost, q: number[] | null): void {
    const view = this.ghosts.get(ghost)!;
    this.ghostConfigs.set(ghost, q);
    view.root.visible = q !== null;
    if (q !== null) {
      view.setConfiguration(q, this.robotBase);
      if (ghost === "live" && this.gizmo.object !== this.eeHandle) {
        const tip = view.tipPose(q, this.robotBase);
        this.eeHandle.position.set(...tip.position);
      }
    }
  }

  setRobotBase(pose: PoseData): void {
    this.robotBase = pose;
    for (const [ghost, q] of this.ghostConfigs) {
      if (q !== null) this.ghosts.get(ghost)!.setConfiguration(q, pose);
    }
  }

  showToast(text: string): void {
    if (!this.toastElement) return;
    this.toastElement.textContent = text;
    this.toastElement.classList.add("visible");
    setTimeout(() => this.toastElement?.classList.remove("visible"), 2500);
  }

  spawnPoint(): Vec3 {
    // a point in front of the camera, dropped near table height
    const direction = new THREE.Vector3();
    this.camera.getWorldDirection(direction);
    const point = this.camera.position.clone().addScaledVector(direction, 1.2);
    return [point.x, point.y, Math.max(point.z, 0.15)];
  }

  detachEndEffectorHandle(): void {
    if (this.gizmo.object === this.eeHandle) this.gizmo.detach();
  }

  snapHandleToTip(q: number[]): void {
    const tip = this.ghosts.get("live")!.tipPose(q, this.robotBase);
    this.eeHandle.position.set(...tip.position);
  }
}
