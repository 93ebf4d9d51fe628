export {
  ServiceClient,
  ServiceError,
  hasOutageData,
  type FinancialResults,
  type JobService,
  type OutageResults,
  type ResultsDocument,
  type ResultsPoll,
  type SimulatedLoadStats,
  type StorageResults,
  type SubmitResponse,
  type TariffResults,
  type TechResults,
  type Violation,
} from './api';
export {
  REQUIRED_INPUTS,
  applyViolations,
  canSubmit,
  clearErrors,
  draftPathFor,
  forkDraft,
  missingInputs,
  newDraft,
  toScenarioDocument,
  type AnalysisType,
  type LoadSelection,
  type OutageWindow,
  type ScenarioDraft,
  type SiteStub,
  type TariffSelection,
} from './draft';
export { RunStore, withState, type RunState, type RunView } from './store';
export { pollToTerminal, submitAndTrack, type SubmitResult, type TrackOptions } from './track';
export {
  compareRuns,
  type CompareResult,
  type CompareView,
  type NumberDiff,
  type OutagePanel,
  type SeriesPair,
} from './compare';
