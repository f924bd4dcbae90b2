/* Shapes of the query service's JSON responses. The UI renders these
 * verbatim: every number shown on screen traces back to one of these fields. */

export interface SampleMetadata {
  id: string;
  dataset?: string;
  year?: number;
  label?: string;
  icd?: string;
  fst?: number;
  age?: number;
  gender?: string;
  origin?: string;
  body_region?: string;
  modality?: string;
  [key: string]: string | number | undefined;
}

export interface HealthResponse {
  status: string;
  version: string;
  n_samples: number;
  n_datasets: number;
}

export interface FieldSummary {
  coverage: number;
  values?: Record<string, number>;
}

export interface SummaryResponse {
  n_samples: number;
  datasets: Record<string, number>;
  fields: Record<string, FieldSummary>;
}

export interface MapPoint {
  id: string;
  x: number;
  y: number;
  [key: string]: string | number | undefined;
}

export interface MapResponse {
  points: MapPoint[];
  total: number;
  offset: number;
  limit: number;
  method: string;
}

export interface QueryHit {
  id: string;
  distance: number;
  metadata: SampleMetadata;
}

export interface QueryResponse {
  k: number;
  results: QueryHit[];
}

export interface QueryRequest {
  vector?: number[];
  sample_id?: string;
  k: number;
  filters?: Record<string, Array<string | number>>;
  pool?: string;
}

export interface HoleRecord {
  rank: number;
  persistence: number | null;
  birth: number;
  death: number | null;
  center: number[];
  size: number;
  radius: number;
  volume: number;
  boundary_ids: string[];
  boundary_terms?: Array<[string, number]>;
}

export interface HolesReport {
  holes: HoleRecord[];
  distance_source: string;
}

export interface DensityReportDoc {
  sparse_ids: string[];
  dense_ids: string[];
  low_threshold: number;
  high_threshold: number;
}
