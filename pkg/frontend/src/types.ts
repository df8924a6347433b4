/** Wire types. Field names mirror the service JSON exactly. */

export type Keymap = Record<string, string>;

export interface Progress {
  done: number;
  total: number;
}

export interface SessionStart {
  annotator_id: string;
  token: string;
  progress: Progress;
}

export interface AnnotationTask {
  clip_id: string;
  subtitle_text: string;
  context_before: string[];
  context_after: string[];
  video_url: string | null;
}

export interface NextTask {
  done: boolean;
  task: AnnotationTask | null;
  progress: Progress;
}

export interface LabelEvent {
  clip_id: string;
  annotator_id: string;
  key_pressed: string;
  label: string;
  timestamp: number;
  attempt: number;
  token?: string;
}

export interface SubmitResult {
  stored: boolean;
  duplicate: boolean;
  relabeled: boolean;
  label: string;
  progress: Progress;
}

export interface LabelEntry {
  label: string;
  source: string;
  annotator_id?: string;
  confidence?: number;
}

export interface ExportRecord {
  clip_id: string;
  video_path: string;
  signer_id: string;
  subtitle_text: string | null;
  start_s: number;
  end_s: number;
  fps: number;
  labels: LabelEntry[];
}

export interface ConsensusExport {
  records: ExportRecord[];
  per_class_counts: Record<string, number>;
  n: number;
  missing_ids: string[];
  disagreement_ids: string[];
}

export interface AgreementExport {
  n: number;
  p_o: number;
  p_e: number;
  ac1: number;
  consensus_size: number;
  per_class_consensus: Record<string, number>;
}

export interface ExportResult {
  total_tasks: number;
  annotators: string[];
  manifests: Record<string, ExportRecord[]>;
  consensus: ConsensusExport | null;
  agreement: AgreementExport | null;
  audit: unknown[];
}
