import type { Violation } from './api';

// A draft is plain form state. The server owns validation; whatever it
// rejects gets echoed back into fieldErrors keyed by the violation path.

export interface SiteStub {
  timeStepsPerHour: 1 | 2 | 4;
  horizonSteps: number;
  spinningReserveKw?: number[];
}

export type LoadSelection =
  | {
      kind: 'reference';
      buildingType: 'flat' | 'office' | 'retail';
      city?: string;
      annualKwh?: number;
    }
  | { kind: 'series'; seriesKw: number[] };

export interface OutageWindow {
  startStep: number;
  endStep: number;
  criticalLoadFraction?: number;
}

export interface TariffSelection {
  urdbResponse: Record<string, unknown>;
  netMeteringLimitKw?: number;
  wholesaleRate?: number;
}

export type AnalysisType = 'financial' | 'resilience';

export interface ScenarioDraft {
  site: SiteStub | null;
  load: LoadSelection | null;
  tariff: TariffSelection | null;
  analysisType: AnalysisType | null;
  outage: OutageWindow | null;
  techs: Record<string, Record<string, unknown>>;
  financial: Record<string, number>;
  fieldErrors: Record<string, string>;
  parentRunUuid: string | null;
}

// The service only needs these four before a run makes sense; everything
// else has workable defaults.
export const REQUIRED_INPUTS = ['site', 'load', 'tariff', 'analysisType'] as const;

export function newDraft(): ScenarioDraft {
  return {
    site: null,
    load: null,
    tariff: null,
    analysisType: null,
    outage: null,
    techs: {},
    financial: {},
    fieldErrors: {},
    parentRunUuid: null,
  };
}

/** Copy a draft for what-if editing, remembering which run it came from. */
export function forkDraft(parent: ScenarioDraft, parentRunUuid: string): ScenarioDraft {
  return {
    ...structuredClone(parent),
    fieldErrors: {},
    parentRunUuid,
  };
}

export function missingInputs(draft: ScenarioDraft): string[] {
  return REQUIRED_INPUTS.filter((name) => draft[name] === null);
}

/** Submit stays disabled until all four minimum inputs are present. */
export function canSubmit(draft: ScenarioDraft): boolean {
  return missingInputs(draft).length === 0;
}

const TECH_SECTION_FOR_NAME: Record<string, string> = {
  pv: 'PV',
  wind: 'Wind',
  generator: 'Generator',
};

// Validation paths use the engine's internal spelling; forms are laid out by
// document section. Renames below cover the fields whose names differ.
const LOAD_FIELD_FOR: Record<string, string> = {
  series: 'series_kw',
  critical_series: 'critical_series_kw',
  critical_fraction: 'critical_load_fraction',
};

const OUTAGE_FIELD_FOR: Record<string, string> = {
  start_step: 'outage_start_time_step',
  end_step: 'outage_end_time_step',
  critical_load: 'outage_critical_load_fraction',
};

/** Map a server violation path onto the scenario document field it points at. */
export function draftPathFor(serverPath: string): string {
  const [head, ...rest] = serverPath.split('.');
  const field = rest.join('.');
  const tech = head.match(/^techs\[\d+\]\(([^)]+)\)$/);
  if (tech) {
    const section = TECH_SECTION_FOR_NAME[tech[1]] ?? tech[1];
    return field ? `${section}.${field}` : section;
  }
  switch (head) {
    case 'storage':
      return field ? `Storage.${field}` : 'Storage';
    case 'load':
      return field ? `LoadProfile.${LOAD_FIELD_FOR[field] ?? field}` : 'LoadProfile';
    case 'outage':
      return field ? `LoadProfile.${OUTAGE_FIELD_FOR[field] ?? field}` : 'LoadProfile';
    case 'financial':
      return field ? `Financial.${field}` : 'Financial';
    case 'tariff':
      return field ? `ElectricTariff.${field}` : 'ElectricTariff';
    case 'analysis_type':
      return 'Site.analysis_type';
    default:
      return serverPath;
  }
}

export function applyViolations(draft: ScenarioDraft, violations: Violation[]): ScenarioDraft {
  const fieldErrors = { ...draft.fieldErrors };
  for (const v of violations) {
    fieldErrors[draftPathFor(v.path)] = v.message;
  }
  return { ...draft, fieldErrors };
}

export function clearErrors(draft: ScenarioDraft): ScenarioDraft {
  return { ...draft, fieldErrors: {} };
}

/** Assemble the wire-format scenario document the job endpoint expects. */
export function toScenarioDocument(draft: ScenarioDraft): Record<string, unknown> {
  if (!canSubmit(draft)) {
    throw new Error(`draft is missing required inputs: ${missingInputs(draft).join(', ')}`);
  }
  const site = draft.site!;
  const load = draft.load!;
  const tariff = draft.tariff!;

  const siteSection: Record<string, unknown> = {
    time_steps_per_hour: site.timeStepsPerHour,
    horizon_steps: site.horizonSteps,
    analysis_type: draft.analysisType,
  };
  if (site.spinningReserveKw !== undefined) {
    siteSection.spinning_reserve_kw = site.spinningReserveKw;
  }

  const loadSection: Record<string, unknown> = {};
  if (load.kind === 'series') {
    loadSection.mode = 'user_series';
    loadSection.series_kw = load.seriesKw;
  } else {
    loadSection.mode = load.annualKwh === undefined ? 'reference' : 'reference_scaled';
    loadSection.building_type = load.buildingType;
    if (load.city !== undefined) loadSection.city = load.city;
    if (load.annualKwh !== undefined) loadSection.annual_kwh = load.annualKwh;
  }
  if (draft.outage) {
    loadSection.outage_start_time_step = draft.outage.startStep;
    loadSection.outage_end_time_step = draft.outage.endStep;
    if (draft.outage.criticalLoadFraction !== undefined) {
      loadSection.outage_critical_load_fraction = draft.outage.criticalLoadFraction;
    }
  }

  const tariffSection: Record<string, unknown> = { urdb_response: tariff.urdbResponse };
  if (tariff.netMeteringLimitKw !== undefined) {
    tariffSection.net_metering_limit_kw = tariff.netMeteringLimitKw;
  }
  if (tariff.wholesaleRate !== undefined) {
    tariffSection.wholesale_rate = tariff.wholesaleRate;
  }

  const doc: Record<string, unknown> = {
    Site: siteSection,
    LoadProfile: loadSection,
    ElectricTariff: tariffSection,
  };
  for (const [section, fields] of Object.entries(draft.techs)) {
    doc[section] = { ...fields };
  }
  if (Object.keys(draft.financial).length > 0) {
    doc.Financial = { ...draft.financial };
  }
  return doc;
}
