import assert from "node:assert/strict";
import { test } from "node:test";

import { validateRulePattern } from "../src/validate.js";

test("accepts a single outcome marker", () => {
  assert.equal(validateRulePattern("risk of <outcome>"), null);
});

test("accepts a single population marker", () => {
  assert.equal(validateRulePattern("patients with <population>"), null);
});

test("accepts an exact-surface marker", () => {
  assert.equal(validateRulePattern("<outcome:hospitalization>"), null);
});

test("rejects a pattern with no marker", () => {
  assert.match(validateRulePattern("just words") ?? "", /marker/);
});

test("rejects two markers", () => {
  assert.match(validateRulePattern("<outcome> vs <population>") ?? "", /exactly one/);
});

test("rejects empty input", () => {
  assert.match(validateRulePattern("   ") ?? "", /empty/);
});
