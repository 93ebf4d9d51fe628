import { hasOutageData, type OutageResults, type ResultsDocument } from './api';
import type { RunView } from './store';

// All numbers here are lifted verbatim from the two results documents and
// subtracted; nothing is re-derived from inputs.

export interface NumberDiff {
  label: string;
  a: number;
  b: number;
  delta: number;
}

/** Struct-of-arrays pair, ready to hand to a chart library as two traces. */
export interface SeriesPair {
  label: string;
  a: number[];
  b: number[];
}

export interface OutagePanel {
  a: OutageResults | null;
  b: OutageResults | null;
  survivalByHour: { a: number[] | null; b: number[] | null };
}

export interface CompareView {
  ready: true;
  runA: string;
  runB: string;
  sizes: NumberDiff[];
  npv: NumberDiff;
  yearOneBill: NumberDiff;
  dispatch: SeriesPair[];
  outage: OutagePanel | null;
  identical: boolean;
}

export type CompareResult = { ready: false; reason: string } | CompareView;

const TECH_SECTIONS = ['PV', 'Wind', 'Generator'] as const;

/**
 * Side-by-side diff of two finished runs. Refuses to compare anything that
 * has not reached Complete, since a partial run has no results to show.
 */
export function compareRuns(runA: RunView, runB: RunView): CompareResult {
  if (runA.state !== 'Complete' || !runA.results) {
    return { ready: false, reason: `run ${runA.runUuid} is ${runA.state}, not Complete` };
  }
  if (runB.state !== 'Complete' || !runB.results) {
    return { ready: false, reason: `run ${runB.runUuid} is ${runB.state}, not Complete` };
  }
  const a = runA.results;
  const b = runB.results;

  const sizes: NumberDiff[] = [];
  for (const section of TECH_SECTIONS) {
    if (a[section] !== undefined || b[section] !== undefined) {
      sizes.push(diff(`${section} size (kW)`, a[section]?.size_kw ?? 0, b[section]?.size_kw ?? 0));
    }
  }
  if (a.Storage !== undefined || b.Storage !== undefined) {
    sizes.push(diff('Storage power (kW)', a.Storage?.size_kw ?? 0, b.Storage?.size_kw ?? 0));
    sizes.push(diff('Storage energy (kWh)', a.Storage?.size_kwh ?? 0, b.Storage?.size_kwh ?? 0));
  }

  const npv = diff('NPV ($)', a.Financial.npv_us_dollars, b.Financial.npv_us_dollars);
  const yearOneBill = diff(
    'Year-one bill ($)',
    a.ElectricTariff.year_one_bill_us_dollars,
    b.ElectricTariff.year_one_bill_us_dollars,
  );

  const dispatch: SeriesPair[] = [
    seriesPair(
      'Grid purchase (kW)',
      a.ElectricTariff.grid_purchase_series_kw,
      b.ElectricTariff.grid_purchase_series_kw,
    ),
  ];
  for (const section of TECH_SECTIONS) {
    if (a[section] !== undefined || b[section] !== undefined) {
      dispatch.push(
        seriesPair(
          `${section} production (kW)`,
          a[section]?.production_series_kw ?? null,
          b[section]?.production_series_kw ?? null,
        ),
      );
    }
  }
  if (a.Storage !== undefined || b.Storage !== undefined) {
    dispatch.push(
      seriesPair('Storage charge (kW)', a.Storage?.charge_series_kw ?? null, b.Storage?.charge_series_kw ?? null),
      seriesPair('Storage discharge (kW)', a.Storage?.discharge_series_kw ?? null, b.Storage?.discharge_series_kw ?? null),
      seriesPair('Storage state of charge (kWh)', a.Storage?.soc_series_kwh ?? null, b.Storage?.soc_series_kwh ?? null),
    );
  }

  const outageA = hasOutageData(a) ? a.Outage : null;
  const outageB = hasOutageData(b) ? b.Outage : null;
  const outage: OutagePanel | null =
    outageA || outageB
      ? {
          a: outageA,
          b: outageB,
          survivalByHour: {
            a: outageA ? outageA.prob_by_hour : null,
            b: outageB ? outageB.prob_by_hour : null,
          },
        }
      : null;

  const identical =
    sizes.every((d) => d.delta === 0) &&
    npv.delta === 0 &&
    yearOneBill.delta === 0 &&
    dispatch.every((pair) => sameSeries(pair.a, pair.b));

  return { ready: true, runA: runA.runUuid, runB: runB.runUuid, sizes, npv, yearOneBill, dispatch, outage, identical };
}

function diff(label: string, a: number, b: number): NumberDiff {
  return { label, a, b, delta: b - a };
}

// Absent sections chart as a flat zero line the same length as the other side.
function seriesPair(label: string, a: number[] | null, b: number[] | null): SeriesPair {
  const length = (a ?? b ?? []).length;
  const zeros = () => new Array<number>(length).fill(0);
  return { label, a: a ?? zeros(), b: b ?? zeros() };
}

function sameSeries(a: number[], b: number[]): boolean {
  return a.length === b.length && a.every((value, i) => value === b[i]);
}
