import type { JobService, Violation } from './api';
import {
  applyViolations,
  canSubmit,
  missingInputs,
  toScenarioDocument,
  type ScenarioDraft,
} from './draft';
import { withState, type RunState, type RunStore, type RunView } from './store';

export interface TrackOptions {
  /** Base poll interval; each miss stretches it by backoffFactor. */
  intervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  /** Give up and mark the run Error after this long without a terminal state. */
  timeoutMs?: number;
  /** Injectable for tests. */
  sleep?: (ms: number) => Promise<void>;
}

export type SubmitResult =
  | { kind: 'blocked'; missing: string[] }
  | { kind: 'rejected'; violations: Violation[]; draft: ScenarioDraft }
  | { kind: 'tracked'; view: RunView };

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

/**
 * Submit a draft and follow it to a terminal state. Every observed state is
 * pushed through the store, so subscribers can render progress live. The
 * returned view is the terminal one (Complete or Error).
 */
export async function submitAndTrack(
  client: JobService,
  store: RunStore,
  draft: ScenarioDraft,
  options: TrackOptions = {},
): Promise<SubmitResult> {
  if (!canSubmit(draft)) {
    return { kind: 'blocked', missing: missingInputs(draft) };
  }

  const response = await client.submitJob(toScenarioDocument(draft));
  if (!response.accepted) {
    return {
      kind: 'rejected',
      violations: response.violations,
      draft: applyViolations(draft, response.violations),
    };
  }

  const runUuid = response.runUuid;
  await store.update(runUuid, () => ({
    runUuid,
    state: 'Submitted',
    stateHistory: ['Submitted'],
    results: null,
    message: null,
    draft,
    submittedAt: Date.now(),
  }));

  const view = await pollToTerminal(client, store, runUuid, options);
  return { kind: 'tracked', view };
}

/** Poll an already-submitted run until Complete or Error. */
export async function pollToTerminal(
  client: JobService,
  store: RunStore,
  runUuid: string,
  options: TrackOptions = {},
): Promise<RunView> {
  const baseInterval = options.intervalMs ?? 1000;
  const backoff = options.backoffFactor ?? 1.5;
  const maxInterval = options.maxIntervalMs ?? 5000;
  const sleep = options.sleep ?? defaultSleep;
  const deadline = options.timeoutMs === undefined ? null : Date.now() + options.timeoutMs;

  let interval = baseInterval;
  for (;;) {
    const poll = await client.fetchResults(runUuid);
    if (poll.kind === 'complete') {
      return store.update(runUuid, (view) =>
        withState({ ...requireView(view, runUuid), results: poll.results }, 'Complete'),
      );
    }
    if (poll.kind === 'failed') {
      return store.update(runUuid, (view) =>
        withState({ ...requireView(view, runUuid), message: poll.message }, 'Error'),
      );
    }
    await store.update(runUuid, (view) =>
      withState(requireView(view, runUuid), poll.status as RunState),
    );
    if (deadline !== null && Date.now() >= deadline) {
      return store.update(runUuid, (view) =>
        withState(
          { ...requireView(view, runUuid), message: 'timed out waiting for results' },
          'Error',
        ),
      );
    }
    await sleep(interval);
    interval = Math.min(interval * backoff, maxInterval);
  }
}

function requireView(view: RunView | undefined, runUuid: string): RunView {
  if (!view) {
    throw new Error(`run ${runUuid} is not in the store`);
  }
  return view;
}
