/** three.js scene wrapper: link mesh with heat-map vertex colors, nodule
 * discs, spline/trace overlays, and pointer-drag painting. Runs only in
 * the browser; all state flows through PainterState.
 */

import * as THREE from "three";
import { colorBuffer, noduleDiscs, traceSegments } from "./overlay.js";
import type { PainterState, StrokeBatcher } from "./state.js";
import type { BrushStroke } from "./types.js";

export class Viewer {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene = new THREE.Scene();
  private readonly camera: THREE.PerspectiveCamera;
  private readonly raycaster = new THREE.Raycaster();
  private readonly surface: THREE.Mesh;
  private readonly geometry: THREE.BufferGeometry;
  private discGroup = new THREE.Group();
  private traceLines: THREE.LineSegments | null = null;
  private painting = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly state: PainterState,
    private readonly batcher: StrokeBatcher,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera = new THREE.PerspectiveCamera(
      45,
      canvas.clientWidth / Math.max(canvas.clientHeight, 1),
      0.001,
      100,
    );
    this.camera.position.fromArray(this.state.view.cameraPosition);
    this.camera.lookAt(new THREE.Vector3(...this.state.view.cameraTarget));

    this.scene.background = new THREE.Color(0x14161a);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.55));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(0.5, -0.8, 1.0);
    this.scene.add(key);

    this.geometry = new THREE.BufferGeometry();
    const verts = new Float32Array(this.state.mesh.vertices.flat());
    this.geometry.setAttribute("position", new THREE.BufferAttribute(verts, 3));
    this.geometry.setIndex(this.state.mesh.faces.flat());
    this.geometry.computeVertexNormals();
    this.surface = new THREE.Mesh(
      this.geometry,
      new THREE.MeshStandardMaterial({
        vertexColors: true,
        roughness: 0.85,
        side: THREE.DoubleSide,
      }),
    );
    this.scene.add(this.surface);
    this.scene.add(this.discGroup);
    this.refreshColors();

    canvas.addEventListener("pointerdown", (e) => this.onPointer(e, true));
    canvas.addEventListener("pointermove", (e) => this.onPointer(e, false));
    canvas.addEventListener("pointerup", () => {
      this.painting = false;
      void this.batcher.flush().then(() => this.refreshColors());
    });
    this.renderer.setAnimationLoop(() => this.renderFrame());
  }

  refreshColors(): void {
    const weights = this.state.maps[this.state.view.activeRole];
    this.geometry.setAttribute(
      "color",
      new THREE.BufferAttribute(colorBuffer(weights), 3),
    );
    this.geometry.attributes.color!.needsUpdate = true;
  }

  /** Rebuild nodule discs and trace lines after generate/optimize. */
  refreshOverlays(): void {
    this.scene.remove(this.discGroup);
    this.discGroup = new THREE.Group();
    if (this.traceLines) this.scene.remove(this.traceLines);
    this.traceLines = null;
    const preview = this.state.preview;
    if (!preview) return;

    const up = new THREE.Vector3(0, 0, 1);
    for (const disc of noduleDiscs(preview.nodules)) {
      const mesh = new THREE.Mesh(
        new THREE.CircleGeometry(disc.radius, 24),
        new THREE.MeshBasicMaterial({
          color: 0xf2e34c,
          side: THREE.DoubleSide,
        }),
      );
      mesh.position.fromArray(disc.center);
      mesh.quaternion.setFromUnitVectors(
        up,
        new THREE.Vector3(...disc.normal).normalize(),
      );
      this.discGroup.add(mesh);
    }
    this.scene.add(this.discGroup);

    const segs = traceSegments(preview.traces);
    if (segs.length > 0) {
      const geo = new THREE.BufferGeometry();
      geo.setAttribute("position", new THREE.BufferAttribute(segs, 3));
      this.traceLines = new THREE.LineSegments(
        geo,
        new THREE.LineBasicMaterial({ color: 0x7ad0ff }),
      );
      this.scene.add(this.traceLines);
    }
  }

  private onPointer(event: PointerEvent, down: boolean): void {
    if (down) this.painting = true;
    if (!this.painting || (!down && event.buttons === 0)) return;
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1,
    );
    this.raycaster.setFromCamera(ndc, this.camera);
    const hit = this.raycaster.intersectObject(this.surface)[0];
    if (!hit) return;
    const brush = this.state.view.brush;
    const stroke: BrushStroke = {
      role: this.state.view.activeRole,
      shape: brush.shape,
      center: [hit.point.x, hit.point.y, hit.point.z],
      extent: brush.radius,
      strength: brush.strength,
      falloff: brush.falloff,
    };
    this.batcher.offer(stroke);
  }

  private renderFrame(): void {
    const view = this.state.view;
    this.camera.position.fromArray(view.cameraPosition);
    this.camera.lookAt(new THREE.Vector3(...view.cameraTarget));
    this.surface.visible = view.overlays.heatmap;
    this.discGroup.visible = view.overlays.nodules;
    if (this.traceLines) this.traceLines.visible = view.overlays.traces;
    this.renderer.render(this.scene, this.camera);
  }
}
