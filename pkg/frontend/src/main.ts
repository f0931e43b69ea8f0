// Browser entry point: build the DOM panels, connect to the server, and run
// the render loop.

import { ConsoleApp } from "./app";
import { ConsoleClient } from "./client";
import { PoseData } from "./math";
import { RobotModel } from "./robot";
import { DragThrottle } from "./throttle";
import { ThreeViewer } from "./viewer";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

async function boot() {
  const statusBar = document.getElementById("status")!;
  const toast = document.getElementById("toast")!;
  const viewport = document.getElementById("viewport")!;

  statusBar.textContent = "loading robot model...";
  const model = await RobotModel.fetch("");
  const wsUrl = `ws://${location.host}/ws`;
  statusBar.textContent = `connecting to ${wsUrl}...`;
  const client = await ConsoleClient.connect(wsUrl, "web-console");

  const viewer = new ThreeViewer(model, viewport, toast);
  const app = await ConsoleApp.boot(client, model, viewer);
  statusBar.textContent = `connected: ${model.name}`;

  // ---- object toolbar ----
  const toolbar = document.getElementById("toolbar")!;
  for (const kind of ["box", "sphere", "cylinder", "capsule"] as const) {
    const button = el("button", {}, `+ ${kind}`);
    button.onclick = () => app.spawn(kind);
    toolbar.appendChild(button);
  }
  const scaleRow = el("div", { class: "row" });
  const scaleInputs = (["x", "y", "z"] as const).map((axis) => {
    const input = el("input", { type: "number", step: "0.1", value: "1.0", title: `scale ${axis}` });
    scaleRow.appendChild(el("label", {}, axis));
    scaleRow.appendChild(input);
    return input;
  });
  const scaleButton = el("button", {}, "scale");
  scaleButton.onclick = () =>
    app.scaleSelected([
      parseFloat(scaleInputs[0].value) || 1,
      parseFloat(scaleInputs[1].value) || 1,
      parseFloat(scaleInputs[2].value) || 1,
    ]);
  scaleRow.appendChild(scaleButton);
  const deleteButton = el("button", {}, "delete");
  deleteButton.onclick = () => app.deleteSelected();
  scaleRow.appendChild(deleteButton);
  toolbar.appendChild(scaleRow);

  const modeRow = el("div", { class: "row" });
  for (const mode of ["translate", "rotate"] as const) {
    const button = el("button", {}, mode);
    button.onclick = () => viewer.setGizmoMode(mode);
    modeRow.appendChild(button);
  }
  const placeButton = el("button", {}, "place robot");
  placeButton.onclick = () => {
    viewer.placingRobot = !viewer.placingRobot;
    placeButton.classList.toggle("active", viewer.placingRobot);
  };
  modeRow.appendChild(placeButton);
  toolbar.appendChild(modeRow);

  // ---- joint sliders ----
  const jointPanel = document.getElementById("joints")!;
  const joints = model.actuatedJoints("default");
  const sliders: HTMLInputElement[] = [];
  joints.forEach((joint, index) => {
    const row = el("div", { class: "row" });
    row.appendChild(el("label", {}, joint.name));
    const slider = el("input", {
      type: "range",
      min: String(joint.limits?.lower ?? -Math.PI),
      max: String(joint.limits?.upper ?? Math.PI),
      step: "0.01",
      value: "0",
    });
    slider.oninput = () => app.setJoint(index, parseFloat(slider.value));
    row.appendChild(slider);
    jointPanel.appendChild(row);
    sliders.push(slider);
  });
  app.replica.onChange(() => {
    const state = app.replica.robotState;
    if (!state) return;
    state.positions.forEach((v, i) => {
      if (sliders[i] && document.activeElement !== sliders[i]) sliders[i].value = String(v);
    });
  });

  // end-effector drag: live IK requests, throttled; release sends one more
  const ikThrottle = new DragThrottle<PoseData>(
    (target) => void app.dragEndEffector(target, 0.0).then(({ applied, result }) => {
      if (!applied) viewer.snapHandleToTip(app.replica.robotState?.positions ?? []);
      void result;
    }),
    10,
  );
  viewer.onEndEffectorDrag = (target, released) => {
    if (released) {
      ikThrottle.finish(target);
      viewer.detachEndEffectorHandle();
    } else {
      ikThrottle.update(target);
    }
  };

  viewer.onSelect = (id) => app.select(id);
  viewer.onDragMove = (id, pose) => app.dragMove(id, pose);
  viewer.onDragEnd = (id, pose) => app.dragEnd(id, pose);
  viewer.onGroundClick = (point) => {
    app.placeRobot(point);
    viewer.placingRobot = false;
    placeButton.classList.remove("active");
  };

  // ---- planning dashboard ----
  const dash = document.getElementById("dashboard")!;
  const plannerSelect = el("select");
  const attempts = el("input", { type: "number", min: "1", value: "3" });
  const maxTime = el("input", { type: "number", min: "0.1", step: "0.5", value: "5" });
  const setStart = el("button", {}, "Set Start State");
  const setGoal = el("button", {}, "Set Goal State");
  const planButton = el("button", { class: "primary" }, "Plan");
  const stopReplay = el("button", {}, "Stop Replay");
  const executeButton = el("button", {}, "Execute Trajectory");
  const mirrorToggle = el("input", { type: "checkbox" });
  const statusLine = el("div", { class: "status-line" }, "no plan yet");
  const progress = el("progress", { max: "1", value: "0" });

  dash.append(
    row("planner", plannerSelect),
    row("attempts", attempts),
    row("max time (s)", maxTime),
    rowButtons(setStart, setGoal),
    rowButtons(planButton, stopReplay),
    rowButtons(executeButton),
    row("mirror", mirrorToggle),
    statusLine,
    progress,
  );

  function row(label: string, control: HTMLElement): HTMLElement {
    const r = el("div", { class: "row" });
    r.appendChild(el("label", {}, label));
    r.appendChild(control);
    return r;
  }
  function rowButtons(...buttons: HTMLElement[]): HTMLElement {
    const r = el("div", { class: "row" });
    buttons.forEach((b) => r.appendChild(b));
    return r;
  }

  app.dashboard.onChange(() => {
    plannerSelect.innerHTML = "";
    for (const id of app.dashboard.plannerIds) {
      const option = el("option", { value: id }, id);
      if (id === app.dashboard.plannerId) option.setAttribute("selected", "selected");
      plannerSelect.appendChild(option);
    }
    statusLine.textContent = app.dashboard.statusLine();
    progress.value = app.dashboard.executeProgress;
    mirrorToggle.checked = app.dashboard.mirrorEnabled;
  });
  plannerSelect.onchange = () => (app.dashboard.plannerId = plannerSelect.value);
  attempts.onchange = () => (app.dashboard.numAttempts = parseInt(attempts.value) || 1);
  maxTime.onchange = () => (app.dashboard.maxPlanningTime = parseFloat(maxTime.value) || 5);
  setStart.onclick = () => app.setStartFromCurrent();
  setGoal.onclick = () => app.setGoalFromCurrent();
  planButton.onclick = () =>
    void app.plan().catch((err) => viewer.showToast(String(err.message ?? err)));
  stopReplay.onclick = () => app.stopReplay();
  executeButton.onclick = () =>
    void app.dashboard.execute(client).catch((err) => viewer.showToast(String(err.message ?? err)));
  mirrorToggle.onchange = () =>
    void app.dashboard.setMirror(client, mirrorToggle.checked).catch(() => undefined);

  // initial joint state render
  if (app.replica.robotState) {
    viewer.setRobotConfig("live", app.clamp(app.replica.robotState.positions));
  }

  // ---- render loop ----
  let last = performance.now();
  function frame(now: number) {
    const dt = (now - last) / 1000;
    last = now;
    app.tick(dt);
    viewer.orbit.update();
    viewer.render();
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

boot().catch((err) => {
  const statusBar = document.getElementById("status");
  if (statusBar) statusBar.textContent = `failed to start: ${err.message ?? err}`;
  console.error(err);
});
