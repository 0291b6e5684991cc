/** Shared test fixtures: a canned analysis view and a tiny in-memory fake of
 * the analysis service behind a fetch-compatible function. */

import type { AnalysisView, EntityView, Rule } from "../src/types.js";

export function fixtureAnalysis(): AnalysisView {
  const sentences = [
    {
      index: 0,
      text: "Risk prediction of stroke in adults with hypertension.",
      tokens: ["Risk", "prediction", "of", "stroke", "in", "adults", "with", "hypertension", "."],
      pico_label: "P" as const,
      pico_probs: [0.55, 0.15, 0.2, 0.1],
      corrected: false,
    },
    {
      index: 1,
      text: "Patients with hypertension were enrolled in the study.",
      tokens: ["Patients", "with", "hypertension", "were", "enrolled", "in", "the", "study", "."],
      pico_label: "P" as const,
      pico_probs: [0.9, 0.04, 0.04, 0.02],
      corrected: false,
    },
    {
      index: 2,
      text: "The model predicts risk of stroke.",
      tokens: ["The", "model", "predicts", "risk", "of", "stroke", "."],
      pico_label: "O" as const,
      pico_probs: [0.05, 0.05, 0.85, 0.05],
      corrected: false,
    },
  ];
  const entity = (
    id: string, si: number, start: number, end: number, surface: string,
    label: "P" | "O", ruleId: string | null,
  ): EntityView => ({
    id, sentence_index: si, start, end, surface,
    s1: 0.5, s2: 0.4, rule_vec: ruleId ? [0, 1] : [0, 0], rule_id: ruleId,
    score_p: 0.45, score_o: 0.55, label, stale: false, corrected: false,
  });
  return {
    doc_id: "p0001",
    title: sentences[0].text,
    abstract: sentences.slice(1).map((s) => s.text).join(" "),
    sentences,
    entities_p: [entity("s1:2-3", 1, 2, 3, "hypertension", "P", null)],
    entities_o: [entity("s2:5-6", 2, 5, 6, "stroke", "O", "b01")],
    model_versions: { pico: "aaa111", dner: "bbb222", graph: null },
    lambda: 0.5,
    fallback_used: false,
  };
}

export interface FakeService {
  fetch: (input: string, init?: RequestInit) => Promise<Response>;
  calls: { method: string; path: string; body: unknown }[];
  analysis: AnalysisView;
  rules: Rule[];
  failNextWith?: { status: number; detail: string };
}

/** Minimal service double: applies delete/relabel corrections to the stored
 * analysis so refetch-after-mutate is observable. */
export function fakeService(initial?: AnalysisView): FakeService {
  const state: FakeService = {
    analysis: initial ?? fixtureAnalysis(),
    rules: [{ id: "b01", target: "O", pattern: "risk of <outcome>", enabled: true, origin: "builtin" }],
    calls: [],
    fetch: async (input, init) => {
      const url = new URL(input, "http://fake");
      const method = init?.method ?? "GET";
      const body = init?.body ? JSON.parse(String(init.body)) : undefined;
      state.calls.push({ method, path: url.pathname, body });

      const respond = (status: number, payload: unknown) =>
        new Response(JSON.stringify(payload), { status, headers: { "content-type": "application/json" } });

      if (state.failNextWith) {
        const { status, detail } = state.failNextWith;
        state.failNextWith = undefined;
        return respond(status, { detail });
      }
      if (method === "GET" && /\/papers\/[^/]+\/analysis$/.test(url.pathname)) {
        return respond(200, state.analysis);
      }
      if (method === "GET" && url.pathname === "/rules") {
        return respond(200, state.rules);
      }
      if (method === "POST" && /\/papers\/[^/]+\/corrections$/.test(url.pathname)) {
        const a = state.analysis;
        if (body.kind === "delete_entity") {
          const before = a.entities_p.length + a.entities_o.length;
          a.entities_p = a.entities_p.filter((e) => e.id !== body.entity_id);
          a.entities_o = a.entities_o.filter((e) => e.id !== body.entity_id);
          if (a.entities_p.length + a.entities_o.length === before) {
            return respond(422, { detail: `unknown entity '${body.entity_id}'` });
          }
        } else if (body.kind === "relabel_sentence") {
          a.sentences[body.sentence_index].pico_label = body.new_label;
          a.sentences[body.sentence_index].corrected = true;
        } else if (body.kind === "relabel_entity") {
          const all = [...a.entities_p, ...a.entities_o];
          const ent = all.find((e) => e.id === body.entity_id);
          if (!ent) return respond(422, { detail: `unknown entity '${body.entity_id}'` });
          ent.label = body.new_label;
          ent.corrected = true;
          a.entities_p = all.filter((e) => e.label === "P");
          a.entities_o = all.filter((e) => e.label === "O");
        } else if (body.kind === "add_entity") {
          const tokens = a.sentences[body.sentence_index].tokens;
          const ent = {
            id: `s${body.sentence_index}:${body.start}-${body.end}`,
            sentence_index: body.sentence_index, start: body.start, end: body.end,
            surface: tokens.slice(body.start, body.end).join(" "),
            s1: null, s2: null, rule_vec: null, rule_id: null,
            score_p: null, score_o: null, label: body.label, stale: false, corrected: true,
          };
          (body.label === "P" ? a.entities_p : a.entities_o).push(ent);
        } else {
          return respond(422, { detail: `unknown correction kind '${body.kind}'` });
        }
        return respond(201, { correction_id: state.calls.length });
      }
      if (method === "POST" && url.pathname === "/rules") {
        if (state.rules.some((r) => r.pattern === body.pattern)) {
          return respond(409, { detail: "rule pattern already registered" });
        }
        const rule: Rule = { id: `u${state.rules.length}`, target: body.target,
                             pattern: body.pattern, enabled: true, origin: "user" };
        state.rules.push(rule);
        return respond(201, rule);
      }
      if (method === "DELETE" && url.pathname.startsWith("/rules/")) {
        const id = url.pathname.split("/").pop()!;
        const before = state.rules.length;
        state.rules = state.rules.filter((r) => r.id !== id);
        if (state.rules.length === before) return respond(404, { detail: `unknown rule '${id}'` });
        return respond(200, { deleted: id });
      }
      return respond(404, { detail: `no route ${method} ${url.pathname}` });
    },
  };
  return state;
}
