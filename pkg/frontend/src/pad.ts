/** The structure generators downsample twice; inputs must be multiples of 4. */
export function paddedSize(w: number, h: number): { width: number; height: number } {
  const up = (v: number) => (v % 4 === 0 ? v : v + (4 - (v % 4)));
  return { width: up(w), height: up(h) };
}

/**
 * Draw an image onto a canvas padded up to multiples of 4 with a white
 * (background-value) border, and return its base64 PNG payload.
 */
export function padToCanvasB64(img: HTMLImageElement): string {
  const { width, height } = paddedSize(img.naturalWidth, img.naturalHeight);
  const canvas = document.createElement('canvas');
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('canvas unavailable');
  ctx.fillStyle = '#ffffff';
  ctx.fillRect(0, 0, width, height);
  ctx.drawImage(img, 0, 0);
  return canvas.toDataURL('image/png').split(',')[1];
}
