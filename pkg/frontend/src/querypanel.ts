/* Neighbor panel: issues /query with the current filters and renders the
 * response 1:1 — same order, raw distances kept on each row — so the panel is
 * a faithful view of the service, never a re-ranking. At most one query is in
 * flight; responses arriving out of order are discarded by sequence number. */

import { AtlasClient, ServiceError } from "./api.js";
import type { ViewState } from "./state.js";
import type { QueryHit, QueryResponse } from "./types.js";

const ROW_FIELDS = ["dataset", "label", "year", "fst", "body_region", "modality"] as const;

export class QueryPanel {
  private sequence = 0;
  lastResponse: QueryResponse | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: AtlasClient,
    private readonly onSelect: (hit: QueryHit) => void,
  ) {}

  /** Run the query described by the state; resolves after the panel updates. */
  async run(state: ViewState): Promise<QueryResponse | null> {
    if (state.selectedId === null) return null;
    const ticket = ++this.sequence;
    const filters: Record<string, string[]> = {};
    for (const [field, values] of Object.entries(state.filters)) {
      if (values.length) filters[field] = values;
    }
    let response: QueryResponse;
    try {
      response = await this.client.query({
        sample_id: state.selectedId,
        k: state.k,
        filters: Object.keys(filters).length ? filters : undefined,
      });
    } catch (error) {
      if (ticket !== this.sequence) return null; // stale failure, newer query pending
      this.renderError(error);
      return null;
    }
    if (ticket !== this.sequence) return null; // stale success, discard
    this.lastResponse = response;
    this.renderResults(response);
    return response;
  }

  private renderError(error: unknown): void {
    this.root.textContent = "";
    const message = document.createElement("p");
    message.className = "query-error";
    if (error instanceof ServiceError && error.status === 422) {
      message.textContent = `No candidates match the active filters (${error.detail}). Relax a filter and retry.`;
    } else if (error instanceof ServiceError) {
      message.textContent = error.message;
    } else {
      message.textContent = `Service unreachable: ${String(error)}`;
    }
    this.root.appendChild(message);
  }

  private renderResults(response: QueryResponse): void {
    this.root.textContent = "";
    const list = document.createElement("ol");
    list.className = "query-results";
    for (const hit of response.results) {
      const row = document.createElement("li");
      row.dataset.id = hit.id;
      row.dataset.distance = String(hit.distance); // raw service value, untransformed
      const head = document.createElement("button");
      head.type = "button";
      head.className = "result-head";
      head.textContent = `${hit.id} — distance ${hit.distance.toPrecision(4)}`;
      head.addEventListener("click", () => this.onSelect(hit));
      row.appendChild(head);
      const meta = document.createElement("dl");
      for (const field of ROW_FIELDS) {
        const value = hit.metadata[field];
        if (value === undefined) continue;
        const dt = document.createElement("dt");
        dt.textContent = field;
        const dd = document.createElement("dd");
        dd.textContent = String(value);
        meta.appendChild(dt);
        meta.appendChild(dd);
      }
      row.appendChild(meta);
      list.appendChild(row);
    }
    this.root.appendChild(list);
  }
}
