import { describe, expect, it } from 'vitest';

import { ApiClient, RenderParams } from '../src/api';
import { paddedSize } from '../src/pad';
import { sweepScales, sweepStrip } from '../src/sweep';

describe('sweepScales', () => {
  it('n=2 gives the endpoints', () => {
    expect(sweepScales(2)).toEqual([0, 1]);
  });

  it('n=5 gives quarter steps', () => {
    expect(sweepScales(5)).toEqual([0, 0.25, 0.5, 0.75, 1]);
  });

  it('rejects n<2', () => {
    expect(() => sweepScales(1)).toThrow();
  });
});

describe('sweepStrip', () => {
  it('renders every frame and keeps failures as placeholders', async () => {
    const api = {
      async render(params: RenderParams) {
        if (params.l === 0.5) throw new Error('mid failure');
        return { imageB64: `img${params.l}`, timingMs: 1 };
      },
    } as unknown as ApiClient;
    const frames = await sweepStrip(api, { style: 's', seed: 1, imageB64: 'x' }, 5);
    expect(frames.length).toBe(5);
    expect(frames[2].imageB64).toBeNull();
    expect(frames[2].error).toMatch('mid failure');
    expect(frames.filter((f) => f.imageB64 !== null).length).toBe(4);
  });
});

describe('paddedSize', () => {
  it('rounds up to multiples of 4', () => {
    expect(paddedSize(30, 30)).toEqual({ width: 32, height: 32 });
    expect(paddedSize(64, 64)).toEqual({ width: 64, height: 64 });
    expect(paddedSize(1, 5)).toEqual({ width: 4, height: 8 });
  });
});
