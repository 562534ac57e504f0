import { ApiClient } from './api';

export interface SweepFrame {
  l: number;
  imageB64: string | null;
  error?: string;
}

export function sweepScales(n: number): number[] {
  if (n < 2) throw new Error('sweep needs at least 2 frames');
  return Array.from({ length: n }, (_, i) => i / (n - 1));
}

/**
 * Render the current image at n evenly spaced scales. Frames render
 * sequentially (the backend is single-core friendly); per-frame failures
 * become placeholder entries instead of aborting the strip.
 */
export async function sweepStrip(
  api: ApiClient,
  params: { style: string; seed: number; imageB64: string },
  n: number,
): Promise<SweepFrame[]> {
  const frames: SweepFrame[] = [];
  for (const l of sweepScales(n)) {
    try {
      const result = await api.render({ ...params, l });
      frames.push({ l, imageB64: result.imageB64 });
    } catch (err) {
      frames.push({ l, imageB64: null, error: err instanceof Error ? err.message : String(err) });
    }
  }
  return frames;
}
