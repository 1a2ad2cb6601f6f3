// View state. Everything displayable is (re)loadable from the API alone:
// a fresh Store pointed at the same route reconstructs the same view.
// The only client-accumulated data is the live lnL trace, which is built
// from status polling by design and rebuilds after a reload.

import { ApiClient, ApiError } from './api.js';
import type {
  AlignmentView,
  ConsensusResponse,
  JobListPage,
  JobStatus,
  JobSummary,
  OutputEntry,
} from './types.js';

export type Route =
  | { view: 'login' }
  | { view: 'jobs' }
  | { view: 'new' }
  | { view: 'help' }
  | { view: 'job'; id: string };

export function parseRoute(hash: string): Route {
  const clean = hash.replace(/^#\/?/, '');
  if (clean === '' || clean === 'jobs') return { view: 'jobs' };
  if (clean === 'login') return { view: 'login' };
  if (clean === 'new') return { view: 'new' };
  if (clean === 'help') return { view: 'help' };
  const match = /^jobs\/([^/]+)$/.exec(clean);
  if (match) return { view: 'job', id: match[1] };
  return { view: 'jobs' };
}

export function routeHash(route: Route): string {
  switch (route.view) {
    case 'login':
      return '#/login';
    case 'jobs':
      return '#/jobs';
    case 'new':
      return '#/new';
    case 'help':
      return '#/help';
    case 'job':
      return `#/jobs/${route.id}`;
  }
}

export type WizardStep =
  | 'create'
  | 'upload'
  | 'alignment'
  | 'model'
  | 'review'
  | 'monitor'
  | 'results';

const RUNNING_STATES = new Set(['Queued', 'Running']);
const TERMINAL_STATES = new Set(['Complete', 'Failed', 'Cancelled']);

// The step is derived from server state only, so a reload at any point
// of the wizard lands the user exactly where they were.
export function wizardStep(job: JobSummary): WizardStep {
  if (TERMINAL_STATES.has(job.state)) return 'results';
  if (RUNNING_STATES.has(job.state)) return 'monitor';
  if (job.state === 'Configured') return 'review';
  if (job.alignment_accepted) return 'model';
  if (job.state === 'Draft') return 'upload';
  return 'alignment';
}

export interface TracePoint {
  gen: number;
  lnl: number;
}

export interface JobView {
  summary: JobSummary;
  alignment: AlignmentView | null;
  masterBlock: string | null;
  status: JobStatus | null;
  outputs: OutputEntry[] | null;
  consensus: ConsensusResponse | null;
}

export interface StoreOptions {
  burnin?: number;
}

export class Store {
  route: Route = { view: 'login' };
  user: string | null = null;
  jobList: JobListPage | null = null;
  jobView: JobView | null = null;
  burnin: number;
  traces = new Map<string, TracePoint[]>();
  lastError: string | null = null;

  constructor(
    public api: ApiClient,
    options: StoreOptions = {},
  ) {
    this.burnin = options.burnin ?? 0.25;
  }

  async login(username: string): Promise<void> {
    await this.api.login(username);
    this.user = username;
    await this.api.initProxy(24 * 3600, 'user');
  }

  async loadRoute(route: Route): Promise<void> {
    this.route = route;
    this.lastError = null;
    if (route.view === 'jobs') {
      this.jobList = await this.api.listJobs();
      this.jobView = null;
    } else if (route.view === 'job') {
      await this.loadJob(route.id);
    }
  }

  private async maybe<T>(call: Promise<T>): Promise<T | null> {
    try {
      return await call;
    } catch (err) {
      if (err instanceof ApiError && (err.status === 404 || err.status === 409)) {
        return null;
      }
      throw err;
    }
  }

  async loadJob(id: string): Promise<JobView> {
    const summary = await this.api.job(id);
    const step = wizardStep(summary);
    const view: JobView = {
      summary,
      alignment: null,
      masterBlock: null,
      status: null,
      outputs: null,
      consensus: null,
    };
    if (summary.state !== 'Draft') {
      view.alignment = await this.maybe(this.api.alignment(id));
    }
    if (summary.configured) {
      view.masterBlock = await this.api.masterBlock(id);
    }
    if (step === 'monitor' || step === 'results') {
      view.status = await this.api.status(id);
      view.outputs = (await this.maybe(this.api.outputs(id)))?.outputs ?? null;
      this.appendTrace(view.status);
    }
    if (step === 'results' && summary.state !== 'Failed') {
      view.consensus = await this.maybe(this.api.consensus(id, this.burnin));
    }
    this.jobView = view;
    return view;
  }

  // status polling feeds the live trace; generations only move forward
  appendTrace(status: JobStatus): void {
    for (const [run, info] of Object.entries(status.runs)) {
      if (info.cold_lnl === null) continue;
      const trace = this.traces.get(run) ?? [];
      const last = trace[trace.length - 1];
      if (!last || info.gen > last.gen) {
        trace.push({ gen: info.gen, lnl: info.cold_lnl });
        this.traces.set(run, trace);
      }
    }
  }

  async refreshCurrentJob(): Promise<void> {
    if (this.route.view !== 'job') return;
    await this.loadJob(this.route.id);
  }

  async setBurnin(value: number): Promise<void> {
    this.burnin = value;
    if (this.route.view === 'job' && this.jobView?.summary.state === 'Complete') {
      this.jobView.consensus = await this.maybe(
        this.api.consensus(this.route.id, value),
      );
    }
  }
}
