// DOM bootstrap: hash routing, form dispatch, and the 2 s poller. All
// view content comes from render.ts; all state changes go through the
// API via the store.

import { ApiClient, ApiError } from './api.js';
import { parseFastaRows } from './fasta.js';
import { Poller } from './poll.js';
import { renderApp } from './render.js';
import { parseRoute, routeHash, Store, wizardStep } from './state.js';

const api = new ApiClient('');
const store = new Store(api);
const root = document.getElementById('app')!;

const savedToken = localStorage.getItem('phyloflow.token');
const savedUser = localStorage.getItem('phyloflow.user');
if (savedToken && savedUser) {
  api.token = savedToken;
  store.user = savedUser;
}

function paint(): void {
  root.innerHTML = renderApp(store);
}

async function navigate(): Promise<void> {
  const route = store.user ? parseRoute(location.hash) : { view: 'login' as const };
  try {
    await store.loadRoute(route);
  } catch (err) {
    if (err instanceof ApiError && err.status === 401) {
      store.user = null;
      api.token = null;
      localStorage.removeItem('phyloflow.token');
      store.route = { view: 'login' };
    } else {
      store.lastError = err instanceof Error ? err.message : String(err);
    }
  }
  paint();
}

const poller = new Poller(async () => {
  if (!store.user) return;
  if (store.route.view === 'jobs') {
    store.jobList = await api.listJobs();
    paint();
  } else if (store.route.view === 'job' && store.jobView) {
    const state = store.jobView.summary.state;
    if (['Aligning', 'Queued', 'Running'].includes(state)) {
      await store.refreshCurrentJob();
      paint();
    }
  }
}, 2000);

type FormHandler = (form: HTMLFormElement) => Promise<void>;

function field(form: HTMLFormElement, name: string): string {
  const el = form.elements.namedItem(name) as
    | HTMLInputElement
    | HTMLTextAreaElement
    | null;
  return el ? el.value : '';
}

function radio(form: HTMLFormElement, name: string): string {
  const el = form.querySelector<HTMLInputElement>(
    `input[name="${name}"]:checked`,
  );
  return el ? el.value : '';
}

function currentJobId(): string {
  if (store.route.view !== 'job') throw new Error('no job in view');
  return store.route.id;
}

const handlers: Record<string, FormHandler> = {
  async login(form) {
    await store.login(field(form, 'username').trim());
    localStorage.setItem('phyloflow.token', api.token ?? '');
    localStorage.setItem('phyloflow.user', store.user ?? '');
    location.hash = '#/jobs';
    await navigate();
  },
  async 'create-job'(form) {
    const job = await api.createJob(
      field(form, 'name'),
      field(form, 'description'),
    );
    location.hash = routeHash({ view: 'job', id: job.id });
    await navigate();
  },
  async upload(form) {
    await api.uploadSequences(
      currentJobId(),
      field(form, 'filename') || 'data.nex',
      field(form, 'content'),
    );
    await store.refreshCurrentJob();
  },
  async realign(_form) {
    await api.requestAlignment(currentJobId());
    await store.refreshCurrentJob();
  },
  async accept(_form) {
    await api.acceptAlignment(currentJobId());
    await store.refreshCurrentJob();
  },
  async replace(form) {
    const records = parseFastaRows(field(form, 'fasta'));
    await api.replaceAlignment(currentJobId(), records);
    await store.refreshCurrentJob();
  },
  async configure(form) {
    await api.configure(currentJobId(), {
      lset: `nst=${radio(form, 'nst')} rates=${radio(form, 'rates')}`,
      ngen: Number(field(form, 'ngen')),
      samplefreq: Number(field(form, 'samplefreq')),
      runs: Number(field(form, 'runs')),
      filebase: field(form, 'filebase'),
      seed: Number(field(form, 'seed') || '0'),
    });
    await store.refreshCurrentJob();
  },
  async reconfigure(_form) {
    // step back to the model form: clearing acceptance is not needed,
    // Configured jobs may be reconfigured freely
    if (store.jobView) store.jobView.summary.state = 'AlignmentReady';
  },
  async 'submit-job'(_form) {
    await api.submit(currentJobId());
    await store.refreshCurrentJob();
  },
  async cancel(_form) {
    await api.cancel(currentJobId());
    await store.refreshCurrentJob();
  },
  async burnin(form) {
    await store.setBurnin(Number(field(form, 'burnin')));
  },
};

document.addEventListener('submit', (event) => {
  const form = event.target as HTMLFormElement;
  const action = form.dataset.action;
  if (!action || !(action in handlers)) return;
  event.preventDefault();
  const confirmText = form.dataset.confirm;
  if (confirmText && !window.confirm(confirmText)) return;
  void handlers[action](form)
    .then(() => {
      store.lastError = null;
      paint();
    })
    .catch((err) => {
      store.lastError = err instanceof Error ? err.message : String(err);
      paint();
    });
});

// authenticated downloads: fetch with the token, hand over a blob URL
document.addEventListener('click', (event) => {
  const anchor = (event.target as HTMLElement).closest('a.download');
  if (!(anchor instanceof HTMLAnchorElement)) return;
  event.preventDefault();
  const name = anchor.dataset.name!;
  void api.outputBytes(currentJobId(), name).then((bytes) => {
    const url = URL.createObjectURL(new Blob([bytes.buffer as ArrayBuffer]));
    const link = document.createElement('a');
    link.href = url;
    link.download = name;
    link.click();
    URL.revokeObjectURL(url);
  });
});

window.addEventListener('hashchange', () => void navigate());
void navigate().then(() => poller.start());

export { store, api, wizardStep };
