/** JSON shapes returned by the analysis service. The UI renders these
 * verbatim; it never does inference of its own. */

export type SentenceLabel = "P" | "IC" | "O" | "N";
export type EntityLabel = "P" | "O";

export interface SentenceView {
  index: number;
  text: string;
  tokens: string[];
  pico_label: SentenceLabel;
  pico_probs: number[]; // (P, IC, O, N), sums to ~1
  corrected: boolean;
}

export interface EntityView {
  id: string;
  sentence_index: number;
  start: number;
  end: number;
  surface: string;
  s1: number | null;
  s2: number | null;
  rule_vec: number[] | null;
  rule_id: string | null;
  score_p: number | null;
  score_o: number | null;
  label: EntityLabel;
  stale: boolean;
  corrected: boolean;
}

export interface AnalysisView {
  doc_id: string;
  title: string;
  abstract: string;
  sentences: SentenceView[];
  entities_p: EntityView[];
  entities_o: EntityView[];
  model_versions: Record<string, string | null>;
  lambda: number;
  fallback_used: boolean;
}

export interface Rule {
  id: string;
  target: EntityLabel;
  pattern: string;
  enabled: boolean;
  origin: string;
}

export type CorrectionBody =
  | { kind: "delete_entity"; entity_id: string }
  | { kind: "relabel_entity"; entity_id: string; new_label: EntityLabel }
  | { kind: "relabel_sentence"; sentence_index: number; new_label: SentenceLabel }
  | { kind: "add_entity"; sentence_index: number; start: number; end: number; label: EntityLabel };
