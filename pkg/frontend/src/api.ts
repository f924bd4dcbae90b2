/* Thin typed client for the atlas query service. The transport is injectable
 * so tests can intercept every request and assert the UI never computes on
 * embeddings itself. */

import type {
  DensityReportDoc,
  HealthResponse,
  HolesReport,
  MapResponse,
  QueryRequest,
  QueryResponse,
  SampleMetadata,
  SummaryResponse,
} from "./types.js";

export type Transport = (input: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service responded ${status}: ${detail}`);
  }
}

export class AtlasClient {
  constructor(
    private readonly baseUrl: string,
    private readonly transport: Transport = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.transport(this.baseUrl + path, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ServiceError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request("/health");
  }

  summary(): Promise<SummaryResponse> {
    return this.request("/corpus/summary");
  }

  async map(fields: string[] = [], pageSize = 50_000): Promise<MapResponse> {
    const base = `/map?fields=${encodeURIComponent(fields.join(","))}`;
    const first = await this.request<MapResponse>(`${base}&offset=0&limit=${pageSize}`);
    const points = [...first.points];
    let offset = points.length;
    while (offset < first.total) {
      const page = await this.request<MapResponse>(`${base}&offset=${offset}&limit=${pageSize}`);
      if (page.points.length === 0) break;
      points.push(...page.points);
      offset += page.points.length;
    }
    return { ...first, points };
  }

  query(body: QueryRequest): Promise<QueryResponse> {
    return this.request("/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  sample(id: string): Promise<SampleMetadata> {
    return this.request(`/sample/${encodeURIComponent(id)}`);
  }

  holesReport(): Promise<HolesReport> {
    return this.request("/report/holes");
  }

  densityReport(): Promise<DensityReportDoc> {
    return this.request("/report/density");
  }
}
