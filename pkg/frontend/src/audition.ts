/**
 * Design-time grid audition: browse grids, play cells, flip between the
 * pre- and post-smoothing difference heatmaps, and play interpolation paths
 * between two chosen cells.
 */

import { HeatmapData } from "./heatmap";

export interface GridInfo {
  id: string;
  resolution: number;
  pitch: number;
}

export interface GridView {
  grid: GridInfo | null;
  stage: "pre" | "post";
  heatmap: HeatmapData | null;
  selected: { i: number; j: number } | null;
  pathStart: { i: number; j: number } | null;
  status: string;
}

export interface AuditionBackend {
  listGrids(): Promise<GridInfo[]>;
  diffField(gridId: string, stage: "pre" | "post"): Promise<HeatmapData>;
  /** Resolves to a URL (or object URL) playable by an <audio> element. */
  cellAudioUrl(gridId: string, i: number, j: number): string;
}

export class AuditionController {
  view: GridView = {
    grid: null,
    stage: "post",
    heatmap: null,
    selected: null,
    pathStart: null,
    status: "idle",
  };

  constructor(
    private backend: AuditionBackend,
    private play: (url: string) => void,
  ) {}

  async open(grid: GridInfo): Promise<void> {
    this.view.grid = grid;
    this.view.selected = null;
    this.view.pathStart = null;
    await this.loadHeatmap();
  }

  /** Swap pre/post heatmaps; the selection is kept. */
  async toggleStage(): Promise<void> {
    this.view.stage = this.view.stage === "pre" ? "post" : "pre";
    await this.loadHeatmap();
  }

  private async loadHeatmap(): Promise<void> {
    if (!this.view.grid) return;
    try {
      this.view.heatmap = await this.backend.diffField(this.view.grid.id, this.view.stage);
      this.view.status = "ready";
    } catch (err) {
      // fetch failures surface in the status line; the view stays usable
      this.view.status = `heatmap unavailable: ${String(err)}`;
    }
  }

  clickCell(i: number, j: number): void {
    if (!this.view.grid) return;
    this.view.selected = { i, j };
    this.play(this.backend.cellAudioUrl(this.view.grid.id, i, j));
    this.view.status = `playing cell (${i}, ${j})`;
  }

  /**
   * Two-click path tool: first click marks the start, second plays the
   * interpolation between them.  Identical endpoints are refused.
   */
  pathClick(i: number, j: number): { from: [number, number]; to: [number, number] } | null {
    if (this.view.pathStart === null) {
      this.view.pathStart = { i, j };
      this.view.status = `path start (${i}, ${j})`;
      return null;
    }
    const start = this.view.pathStart;
    if (start.i === i && start.j === j) {
      this.view.status = "path needs two different cells";
      return null;
    }
    this.view.pathStart = null;
    this.view.status = `path (${start.i}, ${start.j}) -> (${i}, ${j})`;
    return { from: [start.i, start.j], to: [i, j] };
  }
}
