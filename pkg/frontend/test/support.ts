import type { ResultsDocument } from '../src/api';
import { newDraft, type ScenarioDraft, type TariffSelection } from '../src/draft';
import type { RunView } from '../src/store';

export function flatTariff(rate = 0.1): TariffSelection {
  const schedule = Array.from({ length: 12 }, () => new Array(24).fill(0));
  return {
    urdbResponse: {
      energyratestructure: [[{ rate }]],
      energyweekdayschedule: schedule,
      energyweekendschedule: schedule,
    },
  };
}

/** Draft with all four minimum inputs filled in: a small grid-only scenario. */
export function completeDraft(): ScenarioDraft {
  const draft = newDraft();
  draft.site = { timeStepsPerHour: 1, horizonSteps: 24 };
  draft.load = { kind: 'series', seriesKw: Array.from({ length: 24 }, (_, h) => 5 + (h % 4)) };
  draft.tariff = flatTariff();
  draft.analysisType = 'financial';
  return draft;
}

export function fakeResults(overrides: Partial<ResultsDocument> = {}): ResultsDocument {
  return {
    Financial: {
      analysis_years: 10,
      lcc_us_dollars: 900,
      lcc_bau_us_dollars: 1000,
      npv_us_dollars: 100,
      pwf_e: 8,
      pwf_om: 8,
    },
    ElectricTariff: {
      year_one_bill_us_dollars: 90,
      year_one_bill_bau_us_dollars: 100,
      year_one_energy_cost_us_dollars: 80,
      year_one_demand_cost_us_dollars: 10,
      year_one_fixed_cost_us_dollars: 0,
      year_one_min_charge_adder_us_dollars: 0,
      year_one_export_credit_us_dollars: 0,
      year_one_emissions_kg: 50,
      year_one_emissions_bau_kg: 60,
      grid_purchase_series_kw: [5, 6, 7, 8],
      grid_purchase_series_bau_kw: [6, 7, 8, 9],
    },
    Outage: {},
    ...overrides,
  };
}

export function completeView(runUuid: string, results: ResultsDocument): RunView {
  return {
    runUuid,
    state: 'Complete',
    stateHistory: ['Submitted', 'Queued', 'Solving', 'Complete'],
    results,
    message: null,
    draft: completeDraft(),
    submittedAt: 0,
  };
}
