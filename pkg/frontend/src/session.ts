/** Append-only session history: every rendered result stays traceable to the
 * exact request payload that produced it. Exportable/importable as JSON and
 * replayable against the same bundle. */

import { canonicalPayload, ForgeClient, GeneratePayload } from "./api.js";

export interface HistoryEntry {
  kind: "generate" | "interpolate";
  payload: Record<string, unknown>;
  payloadCanonical: string;
  meshes: string[];
  grids: string[];
  at: number; // ms epoch, informational only
}

export interface SessionExport {
  version: 1;
  bundleHash: string | null;
  entries: HistoryEntry[];
}

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "forge-studio-session";

export class SessionState {
  private entries: HistoryEntry[] = [];
  bundleHash: string | null = null;

  constructor(private store: KeyValueStore | null = null) {
    if (store) {
      const raw = store.getItem(STORAGE_KEY);
      if (raw) {
        const data = JSON.parse(raw) as SessionExport;
        this.entries = data.entries;
        this.bundleHash = data.bundleHash;
      }
    }
  }

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  record(
    kind: HistoryEntry["kind"],
    payload: Record<string, unknown>,
    meshes: string[],
    grids: string[],
  ): HistoryEntry {
    const entry: HistoryEntry = {
      kind,
      payload,
      payloadCanonical: canonicalPayload(payload),
      meshes,
      grids,
      at: Date.now(),
    };
    this.entries.push(entry); // append-only
    this.persist();
    return entry;
  }

  private persist(): void {
    if (this.store) {
      this.store.setItem(STORAGE_KEY, JSON.stringify(this.export()));
    }
  }

  export(): SessionExport {
    return { version: 1, bundleHash: this.bundleHash, entries: this.entries };
  }

  static import(data: SessionExport, store: KeyValueStore | null = null): SessionState {
    const s = new SessionState(null);
    s.entries = data.entries.slice();
    s.bundleHash = data.bundleHash;
    if (store) {
      (s as unknown as { store: KeyValueStore }).store = store;
    }
    return s;
  }
}

export interface ReplayResult {
  index: number;
  payloadMatches: boolean;
  meshesIdentical: boolean;
  gridsIdentical: boolean;
}

/** Re-issue every history entry against the service and compare byte for
 * byte. With the same bundle and seeds the service is deterministic, so a
 * faithful replay reproduces identical meshes. */
export async function replaySession(
  session: SessionExport,
  client: ForgeClient,
): Promise<ReplayResult[]> {
  const results: ReplayResult[] = [];
  for (let i = 0; i < session.entries.length; i++) {
    const entry = session.entries[i];
    const payloadMatches =
      canonicalPayload(entry.payload) === entry.payloadCanonical;
    let meshes: string[];
    let grids: string[];
    if (entry.kind === "generate") {
      const res = await client.generate(entry.payload as GeneratePayload);
      meshes = res.meshes;
      grids = res.grids;
    } else {
      const res = await client.interpolate(
        entry.payload as unknown as Parameters<ForgeClient["interpolate"]>[0],
      );
      meshes = res.meshes;
      grids = res.grids;
    }
    results.push({
      index: i,
      payloadMatches,
      meshesIdentical:
        meshes.length === entry.meshes.length &&
        meshes.every((m, j) => m === entry.meshes[j]),
      gridsIdentical:
        grids.length === entry.grids.length &&
        grids.every((g, j) => g === entry.grids[j]),
    });
  }
  return results;
}
