// Mirrors of the service API payloads.

export interface JobSummary {
  id: string;
  name: string;
  description: string;
  owner: string;
  state: string;
  coarse_status: 'in progress' | 'complete';
  created_at: number;
  alignment_accepted: boolean;
  configured: boolean;
  runs: number | null;
  ngen: number | null;
  samplefreq: number | null;
  filebase: string | null;
  lset: string | null;
  datafile: string;
  error: string | null;
}

export interface JobListPage {
  total: number;
  offset: number;
  jobs: JobSummary[];
}

export interface AlignmentRecord {
  id: string;
  residues: string;
}

export interface AlignmentView {
  kind: 'aligned' | 'unaligned';
  accepted: boolean;
  records: AlignmentRecord[];
  conservation: number[] | null;
  mean_conservation: number | null;
}

export interface RunStatus {
  gen: number;
  cold_lnl: number | null;
  swaps_attempted: number;
  swaps_accepted: number;
  done: boolean;
}

export interface JobStatus {
  coarse: string;
  state: string;
  runs: Record<string, RunStatus>;
  error: string | null;
  name: string;
  description: string;
}

export interface OutputEntry {
  name: string;
  size: number;
}

export interface SupportEntry {
  split: string[];
  posterior: number;
}

export interface ConsensusResponse {
  burnin: number;
  newick: string;
  support: SupportEntry[];
  convergence_sd: number | null;
}

export interface ProxyInfo {
  owner: string;
  kind: string;
  issued_at: number;
  expires_at: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  field?: string;
}
