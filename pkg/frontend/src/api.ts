/** Typed client for the inference service. All geometry shown in the UI
 * comes from these endpoints; the client never fabricates vertices. */

export interface ModelInfo {
  k: number;
  latent_dim: number;
  kind: string;
  template: { n: number; dim: number; faces?: number[][] };
  normalization: { center: number[]; coord_scale: number; eig_scale: number };
}

export interface SampleInfo {
  id: number;
  spectrum: number[];
}

export interface DecodeResult {
  vertices: number[][];
  faces?: number[][];
  latent?: number[];
}

export interface BandResult extends DecodeResult {
  spectrum: number[];
}

export interface StyleTransferResult extends DecodeResult {
  alignment: number[];
  predicted_spectrum: number[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string, public field?: string) {
    super(message);
  }
}

async function request<T>(base: string, method: string, path: string, body?: unknown): Promise<T> {
  const resp = await fetch(base + path, {
    method,
    headers: body === undefined ? undefined : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const payload = await resp.json();
  if (!resp.ok) {
    throw new ApiError(resp.status, payload.error ?? resp.statusText, payload.field);
  }
  return payload as T;
}

export class Client {
  constructor(public readonly base: string) {}

  model(): Promise<ModelInfo> {
    return request(this.base, "GET", "/model");
  }

  samples(n: number): Promise<{ samples: SampleInfo[] }> {
    return request(this.base, "GET", `/samples?n=${n}`);
  }

  decode(eigenvalues: number[]): Promise<DecodeResult> {
    return request(this.base, "POST", "/decode", { eigenvalues });
  }

  decodeLatent(latent: number[]): Promise<DecodeResult> {
    return request(this.base, "POST", "/decode-latent", { latent });
  }

  band(baseSpectrum: number[], lo: number, hi: number, factor: number): Promise<BandResult> {
    return request(this.base, "POST", "/band", {
      base_spectrum: baseSpectrum,
      lo,
      hi,
      factor,
    });
  }

  styleTransfer(
    specStyle: number[],
    poseSampleId: number,
    opts: { w?: number; steps?: number } = {},
  ): Promise<StyleTransferResult> {
    return request(this.base, "POST", "/style-transfer", {
      spec_style: specStyle,
      pose_sample_id: poseSampleId,
      ...opts,
    });
  }
}
