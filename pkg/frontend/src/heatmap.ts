/**
 * Grid heatmap rendering and hit-testing for the difference-field view.
 * Pure value -> pixel logic lives here so it is testable without a canvas;
 * drawing wraps it.
 */

export interface HeatmapData {
  matrix: number[][];
  max: number;
}

/** Map a value in [0, max] to an RGB triple (dark blue -> yellow). */
export function colorFor(value: number, max: number): [number, number, number] {
  const t = max > 0 ? Math.max(0, Math.min(1, value / max)) : 0;
  const r = Math.round(255 * Math.min(1, 1.6 * t));
  const g = Math.round(255 * Math.min(1, 1.3 * t * t + 0.15 * t));
  const b = Math.round(255 * (0.25 + 0.35 * (1 - t)));
  return [r, g, b];
}

/** Which cell does a pixel fall in?  Returns null outside the grid. */
export function cellAt(
  x: number,
  y: number,
  width: number,
  height: number,
  resolution: number,
): { i: number; j: number } | null {
  if (x < 0 || y < 0 || x >= width || y >= height) return null;
  const j = Math.floor((x / width) * resolution);
  const i = Math.floor((y / height) * resolution);
  if (i < 0 || j < 0 || i >= resolution || j >= resolution) return null;
  return { i, j };
}

export function drawHeatmap(
  ctx: CanvasRenderingContext2D,
  data: HeatmapData,
  width: number,
  height: number,
  selected: { i: number; j: number } | null = null,
): void {
  const r = data.matrix.length;
  const cw = width / r;
  const ch = height / r;
  for (let i = 0; i < r; i++) {
    for (let j = 0; j < r; j++) {
      const [red, green, blue] = colorFor(data.matrix[i][j], data.max);
      ctx.fillStyle = `rgb(${red},${green},${blue})`;
      ctx.fillRect(j * cw, i * ch, Math.ceil(cw), Math.ceil(ch));
    }
  }
  if (selected) {
    ctx.strokeStyle = "#fff";
    ctx.lineWidth = 2;
    ctx.strokeRect(selected.j * cw + 1, selected.i * ch + 1, cw - 2, ch - 2);
  }
}
