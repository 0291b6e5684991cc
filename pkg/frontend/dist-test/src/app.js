/** Application wiring: fetch state, render, route every mutation through the
 * service, then refetch (no optimistic updates: the server is the single
 * source of truth, so a hard refresh always reproduces the same view). */
import { ApiError } from "./api.js";
import { renderApp } from "./render.js";
import { validateRulePattern } from "./validate.js";
export class ReviewApp {
    constructor(root, client) {
        this.root = root;
        this.client = client;
        this.state = {
            analysis: null,
            rules: [],
            error: null,
            ruleError: null,
            selection: null,
        };
        this.docId = null;
        this.handlers = {
            deleteEntity: (entityId) => void this.mutate(() => this.client.postCorrection(this.docId, { kind: "delete_entity", entity_id: entityId })),
            relabelEntity: (entityId, newLabel) => void this.mutate(() => this.client.postCorrection(this.docId, { kind: "relabel_entity", entity_id: entityId, new_label: newLabel })),
            relabelSentence: (sentenceIndex, newLabel) => void this.mutate(() => this.client.postCorrection(this.docId, {
                kind: "relabel_sentence", sentence_index: sentenceIndex, new_label: newLabel,
            })),
            addEntity: (sentenceIndex, start, end, label) => void this.mutate(() => this.client.postCorrection(this.docId, { kind: "add_entity", sentence_index: sentenceIndex, start, end, label })),
            submitRule: (target, pattern) => void this.submitRule(target, pattern),
            deleteRule: (ruleId) => void this.mutate(() => this.client.deleteRule(ruleId)),
            retry: () => void this.refetch(),
        };
        this.state.onTokenClick = (sentenceIndex, tokenIndex) => this.onTokenClick(sentenceIndex, tokenIndex);
    }
    /** Current UI state (read-only view for tests). */
    get snapshot() {
        return this.state;
    }
    async load(docId) {
        this.docId = docId;
        await this.refetch();
    }
    /** Pull analysis and rules from the server and re-render. */
    async refetch() {
        if (!this.docId)
            return;
        try {
            const [analysis, rules] = await Promise.all([
                this.client.getAnalysis(this.docId),
                this.client.listRules(),
            ]);
            this.state.analysis = analysis;
            this.state.rules = rules;
            this.state.error = null;
            this.state.selection = null;
        }
        catch (err) {
            this.state.error = err instanceof Error ? err.message : String(err);
        }
        this.render();
    }
    render() {
        renderApp(this.root, this.state, this.handlers);
    }
    onTokenClick(sentenceIndex, tokenIndex) {
        const sel = this.state.selection;
        if (sel && sel.sentenceIndex === sentenceIndex && tokenIndex >= sel.start) {
            // second click extends the selection through the clicked token
            this.state.selection = { sentenceIndex, start: sel.start, end: tokenIndex + 1 };
        }
        else {
            this.state.selection = { sentenceIndex, start: tokenIndex, end: tokenIndex + 1 };
        }
        this.render();
    }
    /** Run a mutation; on success refetch, on failure surface the server
     * message without touching local state. */
    async mutate(action) {
        if (!this.docId)
            return;
        try {
            await action();
        }
        catch (err) {
            this.state.error = err instanceof Error ? err.message : String(err);
            this.render();
            return;
        }
        await this.refetch();
    }
    async submitRule(target, pattern) {
        const problem = validateRulePattern(pattern);
        if (problem) {
            // client-side validation: no request leaves the browser
            this.state.ruleError = problem;
            this.render();
            return;
        }
        try {
            await this.client.addRule(target, pattern);
            this.state.ruleError = null;
        }
        catch (err) {
            this.state.ruleError = err instanceof ApiError ? err.serverMessage : String(err);
            this.render();
            return;
        }
        await this.refetch();
    }
}
