/**
 * XY pad: pointer position maps directly to the mesh's (u, v) coordinates,
 * u on the vertical axis (top = 0) and v on the horizontal (left = 0),
 * matching grid cell indexing.
 */

export interface PadGeometry {
  width: number;
  height: number;
}

export function pointToUV(x: number, y: number, geom: PadGeometry): { u: number; v: number } {
  const clamp = (t: number) => Math.max(0, Math.min(1, t));
  return { u: clamp(y / geom.height), v: clamp(x / geom.width) };
}

export class XYPad {
  u = 0.5;
  v = 0.5;
  private dragging = false;

  constructor(
    private geom: PadGeometry,
    private onChange: (u: number, v: number) => void,
  ) {}

  pointerDown(x: number, y: number): void {
    this.dragging = true;
    this.move(x, y);
  }

  pointerMove(x: number, y: number): void {
    if (this.dragging) this.move(x, y);
  }

  pointerUp(): void {
    this.dragging = false;
  }

  private move(x: number, y: number): void {
    const { u, v } = pointToUV(x, y, this.geom);
    this.u = u;
    this.v = v;
    this.onChange(u, v);
  }
}

/** Pitch slider: linear map from slider position in [0, 1] to MIDI range. */
export function sliderToPitch(pos: number, lo = 64, hi = 76): number {
  const clamped = Math.max(0, Math.min(1, pos));
  return lo + clamped * (hi - lo);
}
