import assert from "node:assert/strict";
import { test } from "node:test";

import { ApiClient, ApiError } from "../src/api.js";
import { fakeService } from "./fixtures.js";

test("getAnalysis hits the documented path and parses the body", async () => {
  const service = fakeService();
  const client = new ApiClient("http://fake", service.fetch);
  const analysis = await client.getAnalysis("p0001");
  assert.equal(analysis.doc_id, "p0001");
  assert.deepEqual(service.calls[0], { method: "GET", path: "/papers/p0001/analysis", body: undefined });
});

test("postCorrection sends a JSON body", async () => {
  const service = fakeService();
  const client = new ApiClient("http://fake", service.fetch);
  const out = await client.postCorrection("p0001", { kind: "delete_entity", entity_id: "s2:5-6" });
  assert.ok(out.correction_id >= 1);
  assert.deepEqual(service.calls[0].body, { kind: "delete_entity", entity_id: "s2:5-6" });
});

test("server errors become ApiError with status and detail", async () => {
  const service = fakeService();
  service.failNextWith = { status: 422, detail: "unknown entity 'zzz'" };
  const client = new ApiClient("http://fake", service.fetch);
  await assert.rejects(
    client.postCorrection("p0001", { kind: "delete_entity", entity_id: "zzz" }),
    (err: unknown) => {
      assert.ok(err instanceof ApiError);
      assert.equal(err.status, 422);
      assert.match(err.serverMessage, /unknown entity/);
      return true;
    },
  );
});

test("duplicate rule is surfaced as 409", async () => {
  const service = fakeService();
  const client = new ApiClient("http://fake", service.fetch);
  await assert.rejects(
    client.addRule("O", "risk of <outcome>"),
    (err: unknown) => err instanceof ApiError && err.status === 409,
  );
});

test("trailing slash on the base URL is tolerated", async () => {
  const service = fakeService();
  const client = new ApiClient("http://fake///", service.fetch);
  await client.listRules();
  assert.equal(service.calls[0].path, "/rules");
});
