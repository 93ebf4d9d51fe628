// Typed client for the derplan job service. Everything the UI displays comes
// straight out of these response bodies; no number is recomputed client-side.

export interface Violation {
  path: string;
  message: string;
}

export interface FinancialResults {
  analysis_years: number;
  lcc_us_dollars: number;
  lcc_bau_us_dollars: number;
  npv_us_dollars: number;
  pwf_e: number;
  pwf_om: number;
}

export interface TariffResults {
  year_one_bill_us_dollars: number;
  year_one_bill_bau_us_dollars: number;
  year_one_energy_cost_us_dollars: number;
  year_one_demand_cost_us_dollars: number;
  year_one_fixed_cost_us_dollars: number;
  year_one_min_charge_adder_us_dollars: number;
  year_one_export_credit_us_dollars: number;
  year_one_emissions_kg: number;
  year_one_emissions_bau_kg: number;
  grid_purchase_series_kw: number[];
  grid_purchase_series_bau_kw: number[];
}

export interface TechResults {
  size_kw: number;
  annual_energy_produced_kwh: number;
  production_series_kw: number[];
  export_series_kw: number[];
  annual_fuel_used?: number;
}

export interface StorageResults {
  size_kw: number;
  size_kwh: number;
  charge_series_kw: number[];
  discharge_series_kw: number[];
  soc_series_kwh: number[];
}

export interface OutageResults {
  start_step: number;
  end_step: number;
  steps: number;
  duration_steps: number;
  survived_steps: number[];
  min_survived_steps: number;
  mean_survived_steps: number;
  prob_annual: number;
  prob_by_hour: number[];
  prob_by_month: number[];
}

/** Full results document. Outage is {} when the run was financial-only. */
export interface ResultsDocument {
  Financial: FinancialResults;
  ElectricTariff: TariffResults;
  Outage: OutageResults | Record<string, never>;
  PV?: TechResults;
  Wind?: TechResults;
  Generator?: TechResults;
  Storage?: StorageResults;
}

export function hasOutageData(doc: ResultsDocument): doc is ResultsDocument & { Outage: OutageResults } {
  return Array.isArray((doc.Outage as OutageResults).survived_steps);
}

export type SubmitResponse =
  | { accepted: true; runUuid: string }
  | { accepted: false; violations: Violation[] };

// The results endpoint answers with a small status object until the job is
// terminal, then with the full results body. A full body always carries a
// Financial section; status bodies never do.
export type ResultsPoll =
  | { kind: 'pending'; status: string }
  | { kind: 'failed'; message: string }
  | { kind: 'complete'; results: ResultsDocument };

export interface SimulatedLoadStats {
  doe_reference_name: string;
  annual_kwh: number;
  min_kw: number;
  max_kw: number;
  mean_kw: number;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/** The slice of the client that run tracking needs; handy to stub in tests. */
export interface JobService {
  submitJob(doc: Record<string, unknown>): Promise<SubmitResponse>;
  fetchResults(runUuid: string): Promise<ResultsPoll>;
}

export class ServiceClient implements JobService {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, '') + path;
  }

  /** POST a scenario document; 400 bodies come back as field violations. */
  async submitJob(doc: Record<string, unknown>): Promise<SubmitResponse> {
    const res = await fetch(this.url('/v1/job'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(doc),
    });
    const body = await res.json();
    if (res.status === 400 && Array.isArray(body.violations)) {
      return { accepted: false, violations: body.violations };
    }
    if (!res.ok) {
      throw new ServiceError(res.status, body.error ?? `submit failed (${res.status})`);
    }
    return { accepted: true, runUuid: body.run_uuid };
  }

  /** One poll of the results endpoint. Throws ServiceError on unknown uuid. */
  async fetchResults(runUuid: string): Promise<ResultsPoll> {
    const res = await fetch(this.url(`/v1/job/${runUuid}/results`));
    const body = await res.json();
    if (!res.ok) {
      throw new ServiceError(res.status, body.error ?? `results fetch failed (${res.status})`);
    }
    if (body.Financial !== undefined) {
      return { kind: 'complete', results: body as ResultsDocument };
    }
    if (body.status === 'Error') {
      return { kind: 'failed', message: body.message ?? 'job failed' };
    }
    return { kind: 'pending', status: body.status };
  }

  /** Scenario document schema, for building form fields and hints. */
  async fetchSchema(): Promise<Record<string, unknown>> {
    const res = await fetch(this.url('/v1/help'));
    if (!res.ok) {
      throw new ServiceError(res.status, 'schema fetch failed');
    }
    return res.json();
  }

  /** Reference building load statistics, for the load picker preview. */
  async fetchSimulatedLoad(name: string, annualKwh?: number): Promise<SimulatedLoadStats> {
    const params = new URLSearchParams({ doe_reference_name: name });
    if (annualKwh !== undefined) params.set('annual_kwh', String(annualKwh));
    const res = await fetch(this.url(`/v1/simulated_load?${params}`));
    const body = await res.json();
    if (!res.ok) {
      throw new ServiceError(res.status, body.error ?? 'simulated load fetch failed');
    }
    return body as SimulatedLoadStats;
  }
}
