import { describe, expect, test } from 'vitest';

import { Poller } from '../src/poll.js';
import {
  parseRoute,
  routeHash,
  Store,
  wizardStep,
  type Route,
} from '../src/state.js';
import { ApiClient } from '../src/api.js';
import type { JobStatus, JobSummary } from '../src/types.js';

function summary(overrides: Partial<JobSummary>): JobSummary {
  return {
    id: 'job-0001',
    name: 'primates',
    description: '',
    owner: 'pat',
    state: 'Draft',
    coarse_status: 'in progress',
    created_at: 1700000000,
    alignment_accepted: false,
    configured: false,
    runs: null,
    ngen: null,
    samplefreq: null,
    filebase: null,
    lset: null,
    datafile: 'data.nex',
    error: null,
    ...overrides,
  };
}

describe('routes', () => {
  test('round trip', () => {
    const routes: Route[] = [
      { view: 'login' },
      { view: 'jobs' },
      { view: 'new' },
      { view: 'help' },
      { view: 'job', id: 'job-0042' },
    ];
    for (const route of routes) {
      expect(parseRoute(routeHash(route))).toEqual(route);
    }
  });

  test('defaults to dashboard', () => {
    expect(parseRoute('')).toEqual({ view: 'jobs' });
    expect(parseRoute('#/unknown/route')).toEqual({ view: 'jobs' });
  });
});

describe('wizardStep derives the view from server state alone', () => {
  test('draft means upload', () => {
    expect(wizardStep(summary({ state: 'Draft' }))).toBe('upload');
  });

  test('loaded or aligning means alignment review', () => {
    for (const state of ['SequencesLoaded', 'Aligning', 'AlignmentReady']) {
      expect(wizardStep(summary({ state }))).toBe('alignment');
    }
  });

  test('accepted alignment moves to model', () => {
    expect(
      wizardStep(summary({ state: 'AlignmentReady', alignment_accepted: true })),
    ).toBe('model');
  });

  test('configured means review', () => {
    expect(
      wizardStep(
        summary({
          state: 'Configured',
          alignment_accepted: true,
          configured: true,
        }),
      ),
    ).toBe('review');
  });

  test('queued or running means monitor', () => {
    for (const state of ['Queued', 'Running']) {
      expect(wizardStep(summary({ state }))).toBe('monitor');
    }
  });

  test('terminal states mean results', () => {
    for (const state of ['Complete', 'Failed', 'Cancelled']) {
      expect(wizardStep(summary({ state }))).toBe('results');
    }
  });
});

describe('trace accumulation', () => {
  function status(gen: number, lnl: number): JobStatus {
    return {
      coarse: 'in progress',
      state: 'Running',
      runs: {
        '1': {
          gen,
          cold_lnl: lnl,
          swaps_attempted: 0,
          swaps_accepted: 0,
          done: false,
        },
      },
      error: null,
      name: 'x',
      description: '',
    };
  }

  test('appends monotonically in the generation axis', () => {
    const store = new Store(new ApiClient(''));
    store.appendTrace(status(0, -101));
    store.appendTrace(status(100, -99));
    store.appendTrace(status(100, -99)); // duplicate poll coalesces
    store.appendTrace(status(200, -97));
    const trace = store.traces.get('1')!;
    expect(trace.map((p) => p.gen)).toEqual([0, 100, 200]);
  });

  test('null lnl rows are skipped', () => {
    const store = new Store(new ApiClient(''));
    store.appendTrace({
      ...status(0, 0),
      runs: {
        '1': {
          gen: 0,
          cold_lnl: null,
          swaps_attempted: 0,
          swaps_accepted: 0,
          done: false,
        },
      },
    });
    expect(store.traces.size).toBe(0);
  });
});

describe('poller', () => {
  test('coalesces overlapping ticks', async () => {
    let running = 0;
    let overlapped = false;
    let calls = 0;
    const poller = new Poller(async () => {
      calls += 1;
      running += 1;
      if (running > 1) overlapped = true;
      await new Promise((resolve) => setTimeout(resolve, 30));
      running -= 1;
    }, 1000);
    // fire three concurrent run() calls: only the first may execute
    await Promise.all([poller.run(), poller.run(), poller.run()]);
    expect(overlapped).toBe(false);
    expect(calls).toBe(1);
  });

  test('errors do not break subsequent ticks', async () => {
    let calls = 0;
    const poller = new Poller(async () => {
      calls += 1;
      throw new Error('transient');
    }, 1000);
    await poller.run();
    await poller.run();
    expect(calls).toBe(2);
  });
});
