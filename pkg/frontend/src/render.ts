// Pure renderers: (view data) -> HTML string. No DOM access here, so
// every view is testable in plain node and reproducible byte-for-byte
// from API responses.

import type { Store } from './state.js';
import { wizardStep } from './state.js';
import { renderCladogramSvg, escapeXml } from './svgtree.js';
import type {
  AlignmentView,
  ConsensusResponse,
  JobListPage,
  JobStatus,
  JobSummary,
  OutputEntry,
} from './types.js';

export const esc = escapeXml;

function isoDate(epochSeconds: number): string {
  return new Date(epochSeconds * 1000).toISOString().replace(/\.\d+Z$/, 'Z');
}

function badge(job: Pick<JobSummary, 'state' | 'coarse_status'>): string {
  const coarse = `<span class="coarse ${job.coarse_status === 'complete' ? 'done' : 'busy'}">${job.coarse_status}</span>`;
  // non-terminal and failure detail shown next to the two-word status
  const detail =
    job.state !== 'Complete'
      ? ` <span class="detail state-${job.state}">${esc(job.state)}</span>`
      : '';
  return coarse + detail;
}

export function renderShell(user: string | null, content: string): string {
  const nav = user
    ? `<nav><a href="#/jobs">My jobs</a> <a href="#/new">New submission</a> ` +
      `<a href="#/help">Help</a> <span class="user">${esc(user)}</span></nav>`
    : `<nav><a href="#/help">Help</a></nav>`;
  return `<header><h1>phyloflow portal</h1>${nav}</header><main>${content}</main>`;
}

export function renderLogin(error: string | null = null): string {
  return (
    `<section class="login"><h2>Log in</h2>` +
    (error ? `<p class="error">${esc(error)}</p>` : '') +
    `<form data-action="login">` +
    `<label>User name <input name="username" required></label>` +
    `<button type="submit">Log in</button></form>` +
    `<p class="hint">A compute proxy credential is initialized on login.</p>` +
    `</section>`
  );
}

export function renderDashboard(page: JobListPage): string {
  if (page.jobs.length === 0) {
    return (
      `<section class="dashboard"><h2>My jobs</h2>` +
      `<p class="empty">No calculations yet.</p>` +
      `<p><a class="button" href="#/new">Start a new submission</a></p></section>`
    );
  }
  const rows = page.jobs
    .map(
      (job) =>
        `<tr data-job="${esc(job.id)}">` +
        `<td><a href="#/jobs/${esc(job.id)}">${esc(job.name)}</a></td>` +
        `<td>${esc(job.description)}</td>` +
        `<td>${badge(job)}</td>` +
        `<td>${isoDate(job.created_at)}</td></tr>`,
    )
    .join('');
  return (
    `<section class="dashboard"><h2>My jobs (${page.total})</h2>` +
    `<p><a class="button" href="#/new">New submission</a></p>` +
    `<table><thead><tr><th>Name</th><th>Description</th><th>Status</th>` +
    `<th>Created</th></tr></thead><tbody>${rows}</tbody></table></section>`
  );
}

export function renderHelp(): string {
  return (
    `<section class="help"><h2>Help</h2>` +
    `<p>The portal walks a phylogenetic analysis through five stages:</p>` +
    `<ol>` +
    `<li><strong>Name it.</strong> Give the job a name and a description; they appear on your dashboard with a status of in progress or complete.</li>` +
    `<li><strong>Upload sequences.</strong> FASTA, sequential PHYLIP, Clustal, or NEXUS; everything is converted to NEXUS internally.</li>` +
    `<li><strong>Align.</strong> If the sequences are already aligned you may accept them as-is; otherwise run the built-in progressive aligner, inspect the per-column conservation coloring, and iterate until satisfied. You can also paste a hand-edited replacement (gap structure only).</li>` +
    `<li><strong>Configure the model.</strong> Choose the substitution model (nst = 1, 2 or 6; equal or gamma rates) and the run length, sampling frequency, number of independent runs, and output file stem. The exact command block the engine will execute is previewed live.</li>` +
    `<li><strong>Run and monitor.</strong> Runs execute on the worker backend; watch per-run progress and the cold-chain log-likelihood trace, then download the .p/.t/.mcmc traces and the consensus tree with posterior probabilities.</li>` +
    `</ol></section>`
  );
}

export function renderCreateForm(): string {
  return (
    `<section class="wizard"><h2>New submission — step 1 of 5: name</h2>` +
    `<form data-action="create-job">` +
    `<label>Job name <input name="name" required></label>` +
    `<label>Description <textarea name="description"></textarea></label>` +
    `<button type="submit">Create job</button></form></section>`
  );
}

function conservationClass(score: number): string {
  if (score >= 0.9) return 'c9';
  if (score >= 0.7) return 'c7';
  if (score >= 0.5) return 'c5';
  return 'c0';
}

export function renderAlignmentGrid(alignment: AlignmentView): string {
  const scores = alignment.conservation;
  const rows = alignment.records
    .map((record) => {
      const cells = [...record.residues]
        .map((ch, i) => {
          const cls =
            ch === '-' || !scores ? 'gap' : conservationClass(scores[i]);
          return `<span class="${cls}">${esc(ch)}</span>`;
        })
        .join('');
      return `<div class="row"><span class="taxon">${esc(record.id)}</span>` +
        `<span class="seq">${cells}</span></div>`;
    })
    .join('');
  const mean =
    alignment.mean_conservation !== null
      ? `<p>Mean conservation: <strong>${alignment.mean_conservation.toFixed(4)}</strong></p>`
      : '';
  return `<div class="alignment">${rows}</div>${mean}`;
}

function renderUpload(job: JobSummary, error: string | null): string {
  return (
    `<section class="wizard"><h2>${esc(job.name)} — step 2 of 5: upload sequences</h2>` +
    (error ? `<p class="error">${esc(error)}</p>` : '') +
    `<form data-action="upload">` +
    `<label>File name <input name="filename" value="${esc(job.datafile)}"></label>` +
    `<label>Sequences (FASTA / PHYLIP / Clustal / NEXUS)` +
    `<textarea name="content" rows="12" required></textarea></label>` +
    `<button type="submit">Upload</button></form></section>`
  );
}

function renderAlignmentStep(
  job: JobSummary,
  alignment: AlignmentView | null,
): string {
  const aligning = job.state === 'Aligning';
  const body = alignment ? renderAlignmentGrid(alignment) : '<p>No sequences.</p>';
  const canAccept = alignment !== null && alignment.kind === 'aligned';
  const actions = aligning
    ? `<p class="busy">Alignment task running…</p>`
    : `<form data-action="realign" class="inline"><button type="submit">Re-align</button></form>` +
      (canAccept
        ? `<form data-action="accept" class="inline"><button type="submit">Accept alignment` +
          `${alignment.accepted ? ' (accepted)' : ''}</button></form>`
        : `<p class="hint">Rows have unequal lengths; re-align before accepting.</p>`) +
      `<details><summary>Submit a hand-edited replacement</summary>` +
      `<form data-action="replace"><textarea name="fasta" rows="8" ` +
      `placeholder="&gt;taxon then aligned rows (FASTA)"></textarea>` +
      `<button type="submit">Replace</button></form></details>`;
  return (
    `<section class="wizard"><h2>${esc(job.name)} — step 3 of 5: alignment</h2>` +
    body +
    `<div class="actions">${actions}</div></section>`
  );
}

function renderModelStep(job: JobSummary): string {
  const nst = (value: string, label: string, checked: boolean): string =>
    `<label class="radio"><input type="radio" name="nst" value="${value}"` +
    `${checked ? ' checked' : ''}> ${label}</label>`;
  const rates = (value: string, checked: boolean): string =>
    `<label class="radio"><input type="radio" name="rates" value="${value}"` +
    `${checked ? ' checked' : ''}> ${value}</label>`;
  return (
    `<section class="wizard"><h2>${esc(job.name)} — step 4 of 5: model and run</h2>` +
    `<form data-action="configure">` +
    `<fieldset><legend>Substitution model (lset)</legend>` +
    nst('1', 'nst=1', false) +
    nst('2', 'nst=2', false) +
    nst('6', 'nst=6', true) +
    `<br>` +
    rates('equal', false) +
    rates('gamma', true) +
    `</fieldset>` +
    `<label>Generations (ngen) <input name="ngen" type="number" value="10000" min="1"></label>` +
    `<label>Sample frequency <input name="samplefreq" type="number" value="100" min="1"></label>` +
    `<label>Independent runs <input name="runs" type="number" value="1" min="1"></label>` +
    `<label>Output file stem <input name="filebase" value="${esc(job.datafile)}"></label>` +
    `<label>Seed <input name="seed" type="number" value="0"></label>` +
    `<button type="submit">Save configuration</button></form></section>`
  );
}

function renderReviewStep(job: JobSummary, masterBlock: string | null): string {
  return (
    `<section class="wizard"><h2>${esc(job.name)} — step 5 of 5: review and run</h2>` +
    `<p>The engine will execute this master block (fetched from the server):</p>` +
    `<pre class="master">${esc(masterBlock ?? '(not configured)')}</pre>` +
    `<form data-action="reconfigure" class="inline"><button type="submit">Back to model</button></form>` +
    `<form data-action="submit-job" class="inline"><button type="submit">Run the experiment</button></form>` +
    `</section>`
  );
}

export function renderTraceSvg(
  traces: Map<string, { gen: number; lnl: number }[]>,
  width = 460,
  height = 160,
): string {
  const all = [...traces.values()].flat();
  if (all.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="trace"><text x="10" y="20">waiting for samples…</text></svg>`;
  }
  const maxGen = Math.max(...all.map((p) => p.gen), 1);
  const lnls = all.map((p) => p.lnl);
  const lo = Math.min(...lnls);
  const hi = Math.max(...lnls);
  const span = hi - lo || 1;
  const sx = (g: number): string => ((g / maxGen) * (width - 20) + 10).toFixed(1);
  const sy = (v: number): string =>
    (height - 15 - ((v - lo) / span) * (height - 30)).toFixed(1);
  const lines = [...traces.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([run, points], index) => {
      const path = points.map((p) => `${sx(p.gen)},${sy(p.lnl)}`).join(' ');
      return `<polyline points="${path}" class="run run-${index}" fill="none" data-run="${esc(run)}"/>`;
    })
    .join('');
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" class="trace" role="img" aria-label="lnL trace">` +
    lines +
    `<text x="10" y="12" class="axis">ln L (${lo.toFixed(1)} … ${hi.toFixed(1)}), gen 0…${maxGen}</text>` +
    `</svg>`
  );
}

function renderMonitor(
  job: JobSummary,
  status: JobStatus,
  traceSvg: string,
): string {
  const ngen = job.ngen ?? 0;
  const lanes = Object.entries(status.runs)
    .sort(([a], [b]) => Number(a) - Number(b))
    .map(([run, info]) => {
      const pct = ngen > 0 ? Math.min(100, (info.gen / ngen) * 100) : 0;
      const swapPct =
        info.swaps_attempted > 0
          ? ((info.swaps_accepted / info.swaps_attempted) * 100).toFixed(1) + '%'
          : 'n/a';
      const lnl = info.cold_lnl === null ? '—' : info.cold_lnl.toFixed(2);
      return (
        `<div class="lane" data-run="${esc(run)}">` +
        `<span class="lane-label">run ${esc(run)}</span>` +
        `<div class="bar"><div class="fill" style="width:${pct.toFixed(1)}%"></div></div>` +
        `<span class="lane-info">gen ${info.gen}/${ngen || '?'} · lnL ${lnl} · swaps ${swapPct}` +
        `${info.done ? ' · done' : ''}</span></div>`
      );
    })
    .join('');
  return (
    `<section class="monitor"><h2>${esc(job.name)} — running</h2>` +
    `<p>${badge(job)}</p>` +
    `<div class="lanes">${lanes}</div>` +
    `<figure class="trace-box">${traceSvg}<figcaption>cold-chain ln L</figcaption></figure>` +
    `<form data-action="cancel" class="inline" data-confirm="Cancel this job?">` +
    `<button type="submit" class="danger">Cancel job</button></form></section>`
  );
}

function renderResults(
  job: JobSummary,
  status: JobStatus | null,
  outputs: OutputEntry[] | null,
  consensus: ConsensusResponse | null,
  burnin: number,
): string {
  const failure =
    job.state !== 'Complete'
      ? `<p class="error">Job ${esc(job.state)}${job.error ? `: ${esc(job.error)}` : ''}.` +
        ` Partial outputs, when present, are listed below.</p>`
      : '';
  const files = (outputs ?? [])
    .map(
      (entry) =>
        `<li><a class="download" data-name="${esc(entry.name)}" ` +
        `href="/api/jobs/${esc(job.id)}/outputs/${esc(entry.name)}">${esc(entry.name)}</a>` +
        ` <span class="size">${entry.size} B</span></li>`,
    )
    .join('');
  const supportRows = (consensus?.support ?? [])
    .map(
      (entry) =>
        `<tr><td>${esc(entry.split.join(' | '))}</td>` +
        `<td>${entry.posterior.toFixed(4)}</td></tr>`,
    )
    .join('');
  const convergence =
    consensus && consensus.convergence_sd !== null
      ? `<p>Average split-frequency s.d. across runs: ` +
        `<strong>${consensus.convergence_sd.toFixed(6)}</strong></p>`
      : '';
  const tree = consensus
    ? `<figure class="tree-box">${renderCladogramSvg(consensus.newick)}` +
      `<figcaption>majority-rule consensus (posterior probabilities on edges)</figcaption></figure>` +
      `<pre class="newick">${esc(consensus.newick)}</pre>` +
      (supportRows
        ? `<table class="support"><thead><tr><th>Split</th><th>Posterior</th></tr></thead>` +
          `<tbody>${supportRows}</tbody></table>`
        : '<p class="hint">No split reaches a majority; the consensus is a star.</p>') +
      convergence
    : '<p class="hint">Consensus unavailable.</p>';
  const slider = consensus
    ? `<form data-action="burnin" class="inline burnin">` +
      `<label>Burn-in fraction ` +
      `<input type="range" name="burnin" min="0" max="0.9" step="0.05" value="${burnin}">` +
      `<output>${burnin.toFixed(2)}</output></label>` +
      `<button type="submit">Recompute consensus</button></form>`
    : '';
  const final = status
    ? `<p>Final generations: ${Object.values(status.runs)
        .map((r) => r.gen)
        .join(', ')}</p>`
    : '';
  return (
    `<section class="results"><h2>${esc(job.name)} — results</h2>` +
    `<p>${badge(job)}</p>` +
    failure +
    final +
    `<h3>Output files</h3><ul class="outputs">${files || '<li>none yet</li>'}</ul>` +
    `<h3>Consensus</h3>` +
    slider +
    tree +
    `</section>`
  );
}

export function renderJobView(store: Store): string {
  const view = store.jobView;
  if (!view) return `<p class="error">Job not loaded.</p>`;
  const job = view.summary;
  switch (wizardStep(job)) {
    case 'create':
      return renderCreateForm();
    case 'upload':
      return renderUpload(job, store.lastError);
    case 'alignment':
      return renderAlignmentStep(job, view.alignment);
    case 'model':
      return renderModelStep(job);
    case 'review':
      return renderReviewStep(job, view.masterBlock);
    case 'monitor':
      return view.status
        ? renderMonitor(job, view.status, renderTraceSvg(store.traces))
        : `<p class="busy">Loading status…</p>`;
    case 'results':
      return renderResults(
        job,
        view.status,
        view.outputs,
        view.consensus,
        store.burnin,
      );
  }
}

export function renderApp(store: Store): string {
  let content: string;
  switch (store.route.view) {
    case 'login':
      content = renderLogin(store.lastError);
      break;
    case 'help':
      content = renderHelp();
      break;
    case 'new':
      content = renderCreateForm();
      break;
    case 'jobs':
      content = store.jobList
        ? renderDashboard(store.jobList)
        : '<p class="busy">Loading…</p>';
      break;
    case 'job':
      content = renderJobView(store);
      break;
  }
  return renderShell(store.user, content);
}
