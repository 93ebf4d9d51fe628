import type { ResultsDocument } from './api';
import type { ScenarioDraft } from './draft';

export type RunState =
  | 'Submitted'
  | 'Queued'
  | 'Validating'
  | 'Solving'
  | 'Postprocessing'
  | 'Complete'
  | 'Error';

export interface RunView {
  runUuid: string;
  state: RunState;
  stateHistory: RunState[];
  results: ResultsDocument | null;
  message: string | null;
  draft: ScenarioDraft;
  submittedAt: number;
}

type Updater = (view: RunView | undefined) => RunView | Promise<RunView>;
type Listener = (view: RunView) => void;

/**
 * Holds every tracked run. Multiple pollers write concurrently, so updates
 * are applied one at a time through an internal promise chain; listeners
 * therefore observe a single consistent sequence of states.
 */
export class RunStore {
  private views = new Map<string, RunView>();
  private listeners = new Set<Listener>();
  private chain: Promise<unknown> = Promise.resolve();

  update(runUuid: string, updater: Updater): Promise<RunView> {
    const applied = this.chain.then(async () => {
      const next = await updater(this.views.get(runUuid));
      this.views.set(runUuid, next);
      for (const listener of this.listeners) {
        listener(next);
      }
      return next;
    });
    // keep the chain alive even if one update rejects
    this.chain = applied.catch(() => undefined);
    return applied;
  }

  get(runUuid: string): RunView | undefined {
    return this.views.get(runUuid);
  }

  list(): RunView[] {
    return [...this.views.values()];
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }
}

/** Append a state to a view's history only when it actually changed. */
export function withState(view: RunView, state: RunState): RunView {
  if (view.state === state) {
    return view;
  }
  return { ...view, state, stateHistory: [...view.stateHistory, state] };
}
