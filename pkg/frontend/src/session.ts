import { ApiClient, RenderResult } from './api';

export interface PreviewUpdate {
  requestId: number;
  l: number;
  seed: number;
  style: string;
  imageB64: string;
  timingMs: number;
}

export interface SessionEvents {
  onPreview(update: PreviewUpdate): void;
  onError(message: string): void;
  onBusy?(busy: boolean): void;
}

export function clampScale(l: number): number {
  if (Number.isNaN(l)) return 0;
  return Math.min(1, Math.max(0, l));
}

/**
 * Owns the render loop: at most one request in flight, slider moves during a
 * flight coalesce to the latest values, and a trailing debounce keeps slider
 * floods from turning into request floods. Responses older than the latest
 * dispatched request are never shown (monotonic request ids).
 */
export class Session {
  l = 0;
  seed = 0;
  style: string | null = null;
  glyphStyle: string | null = null;
  textureStyle: string | null = null;
  imageB64: string | null = null;
  debounceMs = 100;

  lastPreview: PreviewUpdate | null = null;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private queued = false;
  private lastDispatchId = 0;
  private idleResolvers: Array<() => void> = [];

  constructor(private api: ApiClient, private events: SessionEvents) {}

  get pending(): boolean {
    return this.inFlight || this.queued || this.timer !== null;
  }

  ready(): boolean {
    const styled = this.style !== null || (this.glyphStyle !== null && this.textureStyle !== null);
    return styled && this.imageB64 !== null;
  }

  setScale(l: number): void {
    this.l = clampScale(l);
    this.requestRender();
  }

  setStyle(style: string | null): void {
    this.style = style;
    this.requestRender();
  }

  setMashup(glyphStyle: string | null, textureStyle: string | null): void {
    this.glyphStyle = glyphStyle;
    this.textureStyle = textureStyle;
    this.requestRender();
  }

  setImage(imageB64: string): void {
    this.imageB64 = imageB64;
    this.requestRender();
  }

  rerollSeed(random: () => number = Math.random): number {
    this.seed = Math.floor(random() * 2 ** 31);
    this.requestRender();
    return this.seed;
  }

  exportFilename(): string {
    const style = this.style ?? `${this.glyphStyle}+${this.textureStyle}`;
    return `${style}_l${this.l.toFixed(2)}_seed${this.seed}.png`;
  }

  /** Resolves once no render is scheduled, queued, or in flight. */
  idle(): Promise<void> {
    if (!this.pending) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  /** Trailing-edge debounce; the dispatch snapshots the latest state. */
  requestRender(): void {
    if (!this.ready()) return;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.dispatch();
    }, this.debounceMs);
  }

  private notifyIdle(): void {
    if (this.pending) return;
    const resolvers = this.idleResolvers;
    this.idleResolvers = [];
    for (const r of resolvers) r();
  }

  private async dispatch(): Promise<void> {
    if (!this.ready()) return;
    if (this.inFlight) {
      this.queued = true;
      return;
    }
    const id = ++this.lastDispatchId;
    const snapshot = {
      style: this.style ?? undefined,
      glyphStyle: this.glyphStyle ?? undefined,
      textureStyle: this.textureStyle ?? undefined,
      l: this.l,
      seed: this.seed,
      imageB64: this.imageB64 as string,
    };
    this.inFlight = true;
    this.events.onBusy?.(true);
    try {
      const result = await this.api.render(snapshot);
      this.applyResponse(id, snapshot, result);
    } catch (err) {
      this.events.onError(err instanceof Error ? err.message : String(err));
    } finally {
      this.inFlight = false;
      this.events.onBusy?.(false);
      if (this.queued) {
        this.queued = false;
        void this.dispatch();
      } else {
        this.notifyIdle();
      }
    }
  }

  private applyResponse(
    id: number,
    snapshot: { l: number; seed: number; style?: string; glyphStyle?: string; textureStyle?: string },
    result: RenderResult,
  ): void {
    if (id < this.lastDispatchId) return; // stale: a newer request was dispatched
    this.lastPreview = {
      requestId: id,
      l: snapshot.l,
      seed: snapshot.seed,
      style: snapshot.style ?? `${snapshot.glyphStyle}+${snapshot.textureStyle}`,
      imageB64: result.imageB64,
      timingMs: result.timingMs,
    };
    this.events.onPreview(this.lastPreview);
  }
}
