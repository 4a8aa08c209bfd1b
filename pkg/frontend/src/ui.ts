/**
 * Browser glue: paint the hair mask over the source photo on a zoomed canvas,
 * pick a reference from the static gallery, submit to the service, and show
 * the result beside the source.
 *
 * The mask is edited at the native 128x128 resolution and displayed with
 * nearest-neighbor zoom, so the painted bitmap is exactly what the request
 * carries. The reference gallery is a static `references/index.json` listing
 * served alongside the UI.
 */

import { ServiceClient, buildRequest } from "./api.js";
import { MASK_SIZE, MaskBitmap, StrokePoint, createMask, hairCoverage } from "./mask.js";
import {
  EditorSession, applyStroke, createSession, setBrush, setReference, storeResult,
  taskForSession, undo,
} from "./session.js";

const ZOOM = 4;

interface GalleryEntry {
  id: string;
  image: string; // url
  mask: string;  // url
}

function base64FromCanvas(canvas: HTMLCanvasElement): string {
  return canvas.toDataURL("image/png").split(",", 2)[1];
}

async function loadImageElement(src: string): Promise<HTMLImageElement> {
  const image = new Image();
  image.crossOrigin = "anonymous";
  await new Promise<void>((resolve, reject) => {
    image.onload = () => resolve();
    image.onerror = () => reject(new Error(`failed to load ${src}`));
    image.src = src;
  });
  return image;
}

function drawToCanvas(image: HTMLImageElement, size: number): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(image, 0, 0, size, size);
  return canvas;
}

function maskFromCanvas(canvas: HTMLCanvasElement): MaskBitmap {
  const ctx = canvas.getContext("2d")!;
  const pixels = ctx.getImageData(0, 0, canvas.width, canvas.height).data;
  const mask = createMask(canvas.width, canvas.height);
  for (let i = 0; i < mask.data.length; i++) {
    mask.data[i] = pixels[i * 4] >= 128 ? 1 : 0;
  }
  return mask;
}

function maskToCanvas(mask: MaskBitmap): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = mask.width;
  canvas.height = mask.height;
  const ctx = canvas.getContext("2d")!;
  const image = ctx.createImageData(mask.width, mask.height);
  for (let i = 0; i < mask.data.length; i++) {
    const v = mask.data[i] ? 255 : 0;
    image.data[i * 4] = v;
    image.data[i * 4 + 1] = v;
    image.data[i * 4 + 2] = v;
    image.data[i * 4 + 3] = 255;
  }
  ctx.putImageData(image, 0, 0);
  return canvas;
}

export class MaskEditor {
  private session!: EditorSession;
  private sourceBitmap!: HTMLCanvasElement;
  private stroke: StrokePoint[] = [];
  private painting = false;
  private readonly client: ServiceClient;

  constructor(private readonly root: HTMLElement, baseUrl: string) {
    this.client = new ServiceClient(baseUrl);
  }

  async start(): Promise<void> {
    this.renderShell();
    await this.loadGallery();
    await this.checkHealth();
  }

  private $(selector: string): HTMLElement {
    return this.root.querySelector(selector) as HTMLElement;
  }

  private renderShell(): void {
    this.root.innerHTML = `
      <div class="toolbar">
        <label>photo <input type="file" id="photo" accept="image/png,image/jpeg"></label>
        <label>mask <input type="file" id="mask" accept="image/png"></label>
        <button id="paint" class="active">paint</button>
        <button id="erase">erase</button>
        <label>radius <input type="range" id="radius" min="1" max="16" value="4"></label>
        <button id="undo">undo</button>
        <span id="coverage"></span>
      </div>
      <div class="panels">
        <div><h3>mask editor</h3><canvas id="editor" width="512" height="512"></canvas></div>
        <div><h3>result</h3><img id="result" width="512" height="512">
          <div>
            <button id="submit">synthesize</button>
            <button id="reroll">re-roll</button>
            <button id="reproduce">reproduce</button>
            <span id="status"></span>
          </div>
        </div>
      </div>
      <div><h3>reference gallery</h3><div id="gallery" class="gallery"></div></div>
      <div id="banner" class="banner" hidden></div>`;

    (this.$("#photo") as HTMLInputElement).addEventListener("change", () => this.loadFiles());
    (this.$("#mask") as HTMLInputElement).addEventListener("change", () => this.loadFiles());
    this.$("#paint").addEventListener("click", () => this.setMode("paint"));
    this.$("#erase").addEventListener("click", () => this.setMode("erase"));
    this.$("#radius").addEventListener("input", (event) => {
      if (!this.session) return;
      const radius = Number((event.target as HTMLInputElement).value);
      this.session = setBrush(this.session, { radius });
    });
    this.$("#undo").addEventListener("click", () => {
      if (!this.session) return;
      this.session = undo(this.session);
      this.redraw();
    });
    this.$("#submit").addEventListener("click", () => void this.submit());
    this.$("#reroll").addEventListener("click", () =>
      void this.submit(Math.floor(Math.random() * 2 ** 31)));
    this.$("#reproduce").addEventListener("click", () => {
      if (this.session?.lastResult) void this.submit(this.session.lastResult.seed);
    });

    const canvas = this.$("#editor") as HTMLCanvasElement;
    canvas.addEventListener("pointerdown", (e) => this.strokeStart(e));
    canvas.addEventListener("pointermove", (e) => this.strokeMove(e));
    window.addEventListener("pointerup", () => this.strokeEnd());
  }

  private setMode(mode: "paint" | "erase"): void {
    if (!this.session) return;
    this.session = setBrush(this.session, { mode });
    this.$("#paint").classList.toggle("active", mode === "paint");
    this.$("#erase").classList.toggle("active", mode === "erase");
  }

  private async loadFiles(): Promise<void> {
    const photoInput = this.$("#photo") as HTMLInputElement;
    const maskInput = this.$("#mask") as HTMLInputElement;
    if (!photoInput.files?.[0] || !maskInput.files?.[0]) return;
    const [photo, mask] = await Promise.all([
      loadImageElement(URL.createObjectURL(photoInput.files[0])),
      loadImageElement(URL.createObjectURL(maskInput.files[0])),
    ]);
    this.sourceBitmap = drawToCanvas(photo, MASK_SIZE);
    const maskCanvas = drawToCanvas(mask, MASK_SIZE);
    this.session = createSession(base64FromCanvas(this.sourceBitmap),
                                 base64FromCanvas(maskCanvas),
                                 maskFromCanvas(maskCanvas));
    this.redraw();
  }

  private canvasPoint(event: PointerEvent): StrokePoint {
    const rect = (this.$("#editor") as HTMLCanvasElement).getBoundingClientRect();
    return { x: Math.floor((event.clientX - rect.left) / ZOOM),
             y: Math.floor((event.clientY - rect.top) / ZOOM) };
  }

  private strokeStart(event: PointerEvent): void {
    if (!this.session) return;
    this.painting = true;
    this.stroke = [this.canvasPoint(event)];
  }

  private strokeMove(event: PointerEvent): void {
    if (!this.painting) return;
    this.stroke.push(this.canvasPoint(event));
    this.previewStroke();
  }

  private strokeEnd(): void {
    if (!this.painting || !this.session) return;
    this.painting = false;
    this.session = applyStroke(this.session, this.stroke);
    this.stroke = [];
    this.redraw();
  }

  private previewStroke(): void {
    if (!this.session) return;
    const preview = applyStroke(this.session, this.stroke);
    this.drawMask(preview.mask);
  }

  private redraw(): void {
    this.drawMask(this.session.mask);
    this.$("#coverage").textContent =
      `hair coverage ${(hairCoverage(this.session.mask) * 100).toFixed(1)}%`;
  }

  private drawMask(mask: MaskBitmap): void {
    const canvas = this.$("#editor") as HTMLCanvasElement;
    const ctx = canvas.getContext("2d")!;
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(this.sourceBitmap, 0, 0, canvas.width, canvas.height);
    ctx.globalAlpha = 0.45;
    ctx.drawImage(maskToCanvas(mask), 0, 0, canvas.width, canvas.height);
    ctx.globalAlpha = 1.0;
  }

  private async loadGallery(): Promise<void> {
    const gallery = this.$("#gallery");
    let entries: GalleryEntry[] = [];
    try {
      entries = await (await fetch("references/index.json")).json();
    } catch {
      gallery.textContent = "no reference gallery found";
      return;
    }
    for (const entry of entries) {
      const thumb = document.createElement("img");
      thumb.src = entry.image;
      thumb.width = 96;
      thumb.title = entry.id;
      thumb.addEventListener("click", async () => {
        const [image, mask] = await Promise.all([
          loadImageElement(entry.image), loadImageElement(entry.mask)]);
        this.session = setReference(this.session, {
          id: entry.id,
          imageBase64: base64FromCanvas(drawToCanvas(image, MASK_SIZE)),
          maskBase64: base64FromCanvas(drawToCanvas(mask, MASK_SIZE)),
        });
        this.$("#status").textContent = `reference: ${entry.id}`;
      });
      gallery.appendChild(thumb);
    }
  }

  private async checkHealth(): Promise<void> {
    try {
      const health = await this.client.health();
      this.$("#status").textContent =
        `service ready (${health.checkpoint_id}, ${health.param_count} params)`;
    } catch {
      this.showBanner("service unreachable; start `hairsynth serve` first");
    }
  }

  private showBanner(message: string): void {
    const banner = this.$("#banner");
    banner.textContent = `${message} (click to dismiss)`;
    banner.hidden = false;
    banner.onclick = () => { banner.hidden = true; };
  }

  private async submit(seed?: number): Promise<void> {
    if (!this.session || this.session.inFlight) return;
    const request = buildRequest(this.session,
                                 seed ?? this.session.lastResult?.seed ?? undefined);
    this.session = { ...this.session, inFlight: true };
    this.$("#status").textContent = `submitting ${taskForSession(this.session)}...`;
    try {
      const result = await this.client.synthesize(request);
      this.session = storeResult(this.session, {
        imageBase64: result.imageBase64, seed: result.seed, latencyMs: result.latencyMs });
      (this.$("#result") as HTMLImageElement).src =
        `data:image/png;base64,${result.imageBase64}`;
      this.$("#status").textContent =
        `seed ${result.seed}, ${result.latencyMs.toFixed(0)} ms`;
    } catch (error) {
      this.session = { ...this.session, inFlight: false };
      this.showBanner(error instanceof Error ? error.message : String(error));
    }
  }
}

declare global {
  interface Window { maskEditor: MaskEditor }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const params = new URLSearchParams(window.location.search);
  const editor = new MaskEditor(document.getElementById("app")!,
                                params.get("service") ?? "http://127.0.0.1:8000");
  window.maskEditor = editor;
  void editor.start();
}
