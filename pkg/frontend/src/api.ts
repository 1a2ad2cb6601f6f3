// Thin fetch client for the service API. Every mutation the portal makes
// goes through here; no business logic lives client-side.

import type {
  AlignmentRecord,
  AlignmentView,
  ApiErrorBody,
  ConsensusResponse,
  JobListPage,
  JobStatus,
  JobSummary,
  OutputEntry,
  ProxyInfo,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public field?: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  token: string | null = null;

  constructor(
    public baseUrl: string = '',
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody | null = null;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(
        response.status,
        parsed?.code ?? 'http_error',
        parsed?.message ?? `HTTP ${response.status}`,
        parsed?.field,
      );
    }
    const type = response.headers.get('content-type') ?? '';
    if (type.startsWith('text/plain')) {
      return (await response.text()) as unknown as T;
    }
    return (await response.json()) as T;
  }

  async login(username: string): Promise<string> {
    const out = await this.request<{ token: string }>('POST', '/api/login', {
      username,
    });
    this.token = out.token;
    return out.token;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request('GET', '/api/health');
  }

  initProxy(lifetimeS: number, kind = 'user'): Promise<ProxyInfo> {
    return this.request('POST', '/api/proxy/init', {
      lifetime_s: lifetimeS,
      kind,
    });
  }

  renewProxy(): Promise<ProxyInfo> {
    return this.request('POST', '/api/proxy/renew');
  }

  listJobs(offset = 0, limit = 100): Promise<JobListPage> {
    return this.request('GET', `/api/jobs?offset=${offset}&limit=${limit}`);
  }

  createJob(name: string, description: string): Promise<JobSummary> {
    return this.request('POST', '/api/jobs', { name, description });
  }

  job(id: string): Promise<JobSummary> {
    return this.request('GET', `/api/jobs/${id}`);
  }

  uploadSequences(
    id: string,
    filename: string,
    content: string,
  ): Promise<JobSummary & { ntax: number; aligned: boolean }> {
    return this.request('POST', `/api/jobs/${id}/sequences`, {
      filename,
      content,
    });
  }

  requestAlignment(
    id: string,
    scoring?: {
      match: number;
      mismatch: number;
      gap_open: number;
      gap_extend: number;
    },
  ): Promise<JobSummary> {
    return this.request('POST', `/api/jobs/${id}/align`, { scoring });
  }

  alignment(id: string): Promise<AlignmentView> {
    return this.request('GET', `/api/jobs/${id}/alignment`);
  }

  replaceAlignment(
    id: string,
    records: AlignmentRecord[],
  ): Promise<JobSummary> {
    return this.request('PUT', `/api/jobs/${id}/alignment`, { records });
  }

  acceptAlignment(id: string): Promise<JobSummary> {
    return this.request('POST', `/api/jobs/${id}/alignment/accept`);
  }

  configure(
    id: string,
    config: {
      lset: string;
      ngen: number;
      samplefreq: number;
      runs: number;
      filebase: string;
      seed?: number;
      nchains?: number;
    },
  ): Promise<JobSummary> {
    return this.request('POST', `/api/jobs/${id}/config`, config);
  }

  masterBlock(id: string): Promise<string> {
    return this.request('GET', `/api/jobs/${id}/master-block`);
  }

  submit(id: string): Promise<JobSummary> {
    return this.request('POST', `/api/jobs/${id}/submit`);
  }

  status(id: string): Promise<JobStatus> {
    return this.request('GET', `/api/jobs/${id}/status`);
  }

  outputs(id: string): Promise<{ outputs: OutputEntry[] }> {
    return this.request('GET', `/api/jobs/${id}/outputs`);
  }

  async outputBytes(id: string, name: string): Promise<Uint8Array> {
    const headers: Record<string, string> = {};
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(
      `${this.baseUrl}/api/jobs/${id}/outputs/${name}`,
      { headers },
    );
    if (!response.ok) {
      throw new ApiError(response.status, 'http_error', `HTTP ${response.status}`);
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  outputUrl(id: string, name: string): string {
    return `${this.baseUrl}/api/jobs/${id}/outputs/${name}`;
  }

  consensus(id: string, burnin: number): Promise<ConsensusResponse> {
    return this.request('GET', `/api/jobs/${id}/consensus?burnin=${burnin}`);
  }

  cancel(id: string): Promise<JobSummary> {
    return this.request('POST', `/api/jobs/${id}/cancel`);
  }
}
