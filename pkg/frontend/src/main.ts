/** Explorer wiring: eigenvalue band sliders drive live decoding through the
 * inference service; extra panels cover latent-grid interpolation and style
 * transfer. All geometry is server-decoded; the page only renders. */

import { ApiError, Client, ModelInfo, SampleInfo } from "./api.js";
import { bilinearWeights, blendLatents } from "./math.js";
import { renderCurve, renderGeometry } from "./render.js";
import { LatestWins, debounce } from "./scheduler.js";
import {
  ExplorerState,
  appliedSpectrum,
  bandRanges,
  fromHash,
  initialState,
  isReset,
  toHash,
} from "./state.js";

const DEBOUNCE_MS = 30;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Explorer {
  private state!: ExplorerState;
  private model!: ModelInfo;
  private samples: SampleInfo[] = [];
  private canvas = el<HTMLCanvasElement>("view");
  private curveCanvas = el<HTMLCanvasElement>("curve");
  private status = el<HTMLDivElement>("status");
  private decoder: LatestWins<number[], { vertices: number[][]; faces?: number[][] }>;
  private updateTimes: number[] = [];

  constructor(private client: Client) {
    this.decoder = new LatestWins(
      (spectrum) => {
        const t0 = performance.now();
        const ranges = bandRanges(this.state.k);
        const active = ranges.findIndex((_, b) => this.state.multipliers[b] !== 1);
        // one-round-trip band edit when a single band moved, plain decode otherwise
        const req =
          active >= 0 && this.state.multipliers.filter((m) => m !== 1).length === 1
            ? this.client.band(
                this.state.baseSpectrum,
                ranges[active].lo,
                ranges[active].hi,
                this.state.multipliers[active],
              )
            : this.client.decode(spectrum);
        return req.then((r) => {
          this.updateTimes.push(performance.now() - t0);
          return r;
        });
      },
      (geom) => this.draw(geom),
      (err) => this.showError(err),
    );
  }

  async start(): Promise<void> {
    this.model = await this.client.model();
    this.state = fromHash(location.hash, initialState(this.model.k));
    const listing = await this.client.samples(16);
    this.samples = listing.samples;
    this.buildSamplePicker();
    this.buildSliders();
    this.bindOrbit();
    el<HTMLButtonElement>("reset").onclick = () => this.reset();
    el<HTMLButtonElement>("transfer").onclick = () => this.styleTransfer();
    const restored = this.state.sampleId;
    this.selectSample(restored !== null && this.samples.some((s) => s.id === restored)
      ? restored
      : this.samples[0]?.id ?? null);
  }

  private buildSamplePicker(): void {
    const picker = el<HTMLSelectElement>("sample");
    picker.innerHTML = "";
    for (const s of this.samples) {
      const opt = document.createElement("option");
      opt.value = String(s.id);
      opt.textContent = `sample ${s.id}`;
      picker.appendChild(opt);
    }
    picker.onchange = () => this.selectSample(Number(picker.value));
    const posePicker = el<HTMLSelectElement>("pose-sample");
    posePicker.innerHTML = picker.innerHTML;
  }

  private buildSliders(): void {
    const holder = el<HTMLDivElement>("bands");
    holder.innerHTML = "";
    const ranges = bandRanges(this.state.k);
    const labels = ["low", "mid", "high"];
    const push = debounce(() => this.refresh(), DEBOUNCE_MS);
    ranges.forEach((range, b) => {
      const row = document.createElement("div");
      row.className = "band-row";
      const label = document.createElement("label");
      label.textContent = `${labels[b] ?? `band ${b}`} (${range.lo}–${range.hi})`;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = "0.5";
      slider.max = "1.5";
      slider.step = "0.01";
      slider.value = String(this.state.multipliers[b]);
      slider.id = `band-${b}`;
      const readout = document.createElement("span");
      readout.textContent = `×${Number(slider.value).toFixed(2)}`;
      slider.oninput = () => {
        this.state.multipliers[b] = Number(slider.value);
        readout.textContent = `×${Number(slider.value).toFixed(2)}`;
        this.persist();
        push();
      };
      row.append(label, slider, readout);
      holder.appendChild(row);
    });
  }

  private selectSample(id: number | null): void {
    if (id === null) return;
    const sample = this.samples.find((s) => s.id === id);
    if (!sample) return;
    if (sample.spectrum.length !== this.state.k) {
      this.disableSliders(
        `sample has ${sample.spectrum.length} eigenvalues but the model expects ${this.state.k}`,
      );
      return;
    }
    this.state.sampleId = id;
    this.state.baseSpectrum = sample.spectrum.slice();
    el<HTMLSelectElement>("sample").value = String(id);
    this.persist();
    this.refresh();
  }

  private disableSliders(reason: string): void {
    document.querySelectorAll<HTMLInputElement>("#bands input").forEach((s) => {
      s.disabled = true;
    });
    this.status.textContent = reason;
  }

  private reset(): void {
    this.state.multipliers = this.state.multipliers.map(() => 1);
    this.buildSliders();
    this.persist();
    this.refresh();
  }

  private refresh(): void {
    this.decoder.dispatch(appliedSpectrum(this.state));
  }

  private persist(): void {
    history.replaceState(null, "", toHash(this.state));
  }

  private draw(geom: { vertices: number[][]; faces?: number[][] }): void {
    const faces = geom.faces ?? this.model.template.faces;
    renderGeometry(
      this.canvas.getContext("2d")!,
      { vertices: geom.vertices, faces },
      this.state.camera,
      this.canvas.width,
      this.canvas.height,
    );
    const recent = this.updateTimes.slice(-40).sort((a, b) => a - b);
    const p95 = recent[Math.floor(recent.length * 0.95)] ?? recent[recent.length - 1];
    this.status.textContent = isReset(this.state)
      ? `plain reconstruction of sample ${this.state.sampleId} · p95 ${p95?.toFixed(0) ?? "-"} ms`
      : `band-edited spectrum · p95 ${p95?.toFixed(0) ?? "-"} ms`;
  }

  private showError(err: unknown): void {
    const msg = err instanceof ApiError ? `${err.status}: ${err.message}` : String(err);
    this.status.innerHTML = "";
    const text = document.createElement("span");
    text.textContent = `server error — ${msg} `;
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.onclick = () => this.refresh();
    this.status.append(text, retry);
  }

  private bindOrbit(): void {
    let dragging = false;
    let last = [0, 0];
    this.canvas.onmousedown = (e) => {
      dragging = true;
      last = [e.clientX, e.clientY];
    };
    window.addEventListener("mouseup", () => (dragging = false));
    window.addEventListener("mousemove", (e) => {
      if (!dragging) return;
      this.state.camera.yaw += (e.clientX - last[0]) * 0.01;
      this.state.camera.pitch = Math.max(
        -1.4,
        Math.min(1.4, this.state.camera.pitch + (e.clientY - last[1]) * 0.01),
      );
      last = [e.clientX, e.clientY];
      this.persist();
      this.refresh();
    });
    this.canvas.onwheel = (e) => {
      e.preventDefault();
      this.state.camera.dist = Math.max(1.2, Math.min(9, this.state.camera.dist + e.deltaY * 0.002));
      this.persist();
      this.refresh();
    };
  }

  private async styleTransfer(): Promise<void> {
    const poseId = Number(el<HTMLSelectElement>("pose-sample").value);
    try {
      const res = await this.client.styleTransfer(appliedSpectrum(this.state), poseId, {
        steps: 200,
      });
      this.draw(res);
      renderCurve(
        this.curveCanvas.getContext("2d")!,
        res.alignment,
        this.curveCanvas.width,
        this.curveCanvas.height,
      );
      this.status.textContent = `style transfer: alignment ${res.alignment[0].toFixed(3)} → ${res.alignment[res.alignment.length - 1].toFixed(3)}`;
    } catch (err) {
      this.showError(err);
    }
  }

  /** g x g latent interpolation of the first four samples, rendered as tiles. */
  async interpolationGrid(g: number): Promise<number[][][]> {
    const ids = this.state.corners.length === 4 ? this.state.corners : [0, 1, 2, 3];
    const corners: number[][] = [];
    for (const id of ids) {
      const sample = this.samples.find((s) => s.id === id) ?? this.samples[0];
      const dec = await this.client.decode(sample.spectrum);
      corners.push(dec.latent!);
    }
    const out: number[][][] = [];
    for (let i = 0; i < g; i++) {
      for (let j = 0; j < g; j++) {
        const blend = blendLatents(corners, bilinearWeights(i, j, g));
        const dec = await this.client.decodeLatent(blend);
        out.push(dec.vertices);
      }
    }
    return out;
  }
}

export function boot(): void {
  const client = new Client("");
  new Explorer(client).start().catch((err) => {
    const status = document.getElementById("status");
    if (status) status.textContent = `failed to reach the model service: ${err}`;
  });
}

if (typeof document !== "undefined" && document.getElementById("view")) {
  boot();
}
