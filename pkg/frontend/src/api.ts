export interface StyleEntry {
  name: string;
  status: string;
  created?: string;
  lambda_gly?: string;
  detail?: string;
}

export interface RenderParams {
  style?: string;
  l: number;
  seed: number;
  imageB64: string;
  glyphStyle?: string;
  textureStyle?: string;
  invert?: boolean;
}

export interface RenderResult {
  imageB64: string;
  timingMs: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  async styles(): Promise<StyleEntry[]> {
    const res = await this.fetchFn(this.url('/api/styles'));
    if (!res.ok) {
      throw new ApiError(res.status, `catalog request failed (${res.status})`);
    }
    const body = await res.json();
    return body.styles as StyleEntry[];
  }

  async render(params: RenderParams): Promise<RenderResult> {
    const payload: Record<string, unknown> = {
      l: params.l,
      seed: params.seed,
      image_b64: params.imageB64,
      invert: params.invert ?? true,
    };
    if (params.glyphStyle && params.textureStyle) {
      payload.glyph_style = params.glyphStyle;
      payload.texture_style = params.textureStyle;
    } else {
      payload.style = params.style;
    }
    const res = await this.fetchFn(this.url('/api/render'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!res.ok) {
      let detail = `render failed (${res.status})`;
      try {
        const body = await res.json();
        if (body.detail) detail = `${body.detail}`;
      } catch {
        // keep the generic message
      }
      throw new ApiError(res.status, detail);
    }
    const body = await res.json();
    return { imageB64: body.image_b64, timingMs: body.timing_ms };
  }

  async health(): Promise<{ status: string; loadedStyles: number }> {
    const res = await this.fetchFn(this.url('/health'));
    const body = await res.json();
    return { status: body.status, loadedStyles: body.loaded_styles };
  }
}
