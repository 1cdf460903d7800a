// Search controller: submits the edited canvas, keeps the 3x3 suggestion
// grid, and feeds selected results into the quiz-maker image tray.

import { ApiClient, StaleIndexError } from "./api.js";
import { CanvasState } from "./canvas.js";
import { SearchResultEntry } from "./schemas.js";

export class SearchController {
  results: SearchResultEntry[] = [];
  staleIndex = false;
  lastError: string | null = null;
  tray: SearchResultEntry[] = [];

  constructor(
    private api: ApiClient,
    private canvas: CanvasState,
  ) {}

  async run(k = 9, minGapMs = 2000): Promise<SearchResultEntry[]> {
    this.lastError = null;
    if (!this.canvas.canSubmit()) {
      this.lastError = "fix degenerate polygons before searching";
      throw new Error(this.lastError);
    }
    try {
      const response = await this.api.search(this.canvas.toWire(), k, minGapMs);
      this.results = response.results;
      this.staleIndex = false;
      return this.results;
    } catch (err) {
      if (err instanceof StaleIndexError) {
        // surfaced in the UI as a rebuild prompt
        this.staleIndex = true;
      }
      this.lastError = err instanceof Error ? err.message : String(err);
      throw err;
    }
  }

  async rebuildAndRetry(k = 9, minGapMs = 2000): Promise<SearchResultEntry[]> {
    await this.api.rebuildIndex();
    this.staleIndex = false;
    return this.run(k, minGapMs);
  }

  // 3x3 arrangement for the suggestion panel; short rows padded with null.
  grid(): (SearchResultEntry | null)[][] {
    const rows: (SearchResultEntry | null)[][] = [];
    for (let r = 0; r < 3; r++) {
      rows.push(
        [0, 1, 2].map((c) => this.results[r * 3 + c] ?? null),
      );
    }
    return rows;
  }

  selectResult(index: number): SearchResultEntry {
    const entry = this.results[index];
    if (!entry) throw new Error(`no search result ${index}`);
    if (!this.tray.some((t) => t.frame.id === entry.frame.id)) {
      this.tray.push(entry);
    }
    return entry;
  }
}
