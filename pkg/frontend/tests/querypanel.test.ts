import { beforeEach, describe, expect, it } from "vitest";

import { AtlasClient } from "../src/api.js";
import { QueryPanel } from "../src/querypanel.js";
import { DEFAULT_STATE, cloneState } from "../src/state.js";
import { mockService } from "./mock_service.js";
import type { QueryHit } from "../src/types.js";

beforeEach(() => {
  document.body.innerHTML = '<div id="panel"></div>';
});

function stateFor(id: string, k = 5, filters: Record<string, string[]> = {}) {
  const state = cloneState(DEFAULT_STATE);
  state.selectedId = id;
  state.k = k;
  state.filters = filters;
  return state;
}

describe("QueryPanel", () => {
  it("renders the service response 1:1 — order, ids, raw distances", async () => {
    const mock = mockService();
    const client = new AtlasClient("http://mock", mock.transport);
    const panel = new QueryPanel(document.getElementById("panel")!, client, () => {});
    const response = await panel.run(stateFor("s000", 5));
    const rows = [...document.querySelectorAll<HTMLElement>(".query-results li")];
    expect(rows).toHaveLength(response!.results.length);
    rows.forEach((row, i) => {
      expect(row.dataset.id).toBe(response!.results[i]!.id);
      // raw service value, no client-side recomputation or re-ranking
      expect(row.dataset.distance).toBe(String(response!.results[i]!.distance));
    });
    const shownMeta = rows[0]!.querySelector("dd")!.textContent;
    expect(shownMeta).toBe(String(response!.results[0]!.metadata.dataset));
  });

  it("applies the active filters to the query body", async () => {
    const mock = mockService();
    const client = new AtlasClient("http://mock", mock.transport);
    const panel = new QueryPanel(document.getElementById("panel")!, client, () => {});
    const response = await panel.run(stateFor("s000", 8, { dataset: ["beta"] }));
    expect(response!.results.length).toBeGreaterThan(0);
    for (const hit of response!.results) expect(hit.metadata.dataset).toBe("beta");
  });

  it("names the filter problem on a 422 from the service", async () => {
    const mock = mockService();
    const client = new AtlasClient("http://mock", mock.transport);
    const panel = new QueryPanel(document.getElementById("panel")!, client, () => {});
    const response = await panel.run(stateFor("s000", 3, { label: ["nothing-matches"] }));
    expect(response).toBeNull();
    const message = document.querySelector(".query-error")!.textContent!;
    expect(message).toContain("Relax a filter");
  });

  it("clicking a result hands the hit to the selection callback", async () => {
    const mock = mockService();
    const client = new AtlasClient("http://mock", mock.transport);
    const selected: QueryHit[] = [];
    const panel = new QueryPanel(document.getElementById("panel")!, client, (hit) =>
      selected.push(hit),
    );
    const response = await panel.run(stateFor("s003"));
    document.querySelector<HTMLButtonElement>(".query-results .result-head")!.click();
    expect(selected).toHaveLength(1);
    expect(selected[0]!.id).toBe(response!.results[0]!.id);
  });

  it("discards stale responses by sequence number", async () => {
    // first query resolves after the second: the panel must show the second
    const mock = mockService({ queryDelayMs: (call) => (call === 0 ? 40 : 0) });
    const client = new AtlasClient("http://mock", mock.transport);
    const panel = new QueryPanel(document.getElementById("panel")!, client, () => {});
    const slow = panel.run(stateFor("s000"));
    const fast = panel.run(stateFor("s006"));
    const [slowResult, fastResult] = await Promise.all([slow, fast]);
    expect(slowResult).toBeNull(); // superseded
    expect(fastResult).not.toBeNull();
    const firstRow = document.querySelector<HTMLElement>(".query-results li")!;
    expect(firstRow.dataset.id).toBe(fastResult!.results[0]!.id);
    expect(panel.lastResponse).toBe(fastResult);
  });
});
