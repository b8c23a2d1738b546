/**
 * Wire-protocol inference server: POST /infer with {"features": [...]}
 * answers {"logits": [...]}.
 *
 * Deliberately framework-free (node:http and hand-rolled numerics) so the
 * numbers it produces can be compared against the gateway's builtin path
 * to 1e-9. Chaos modes inject the failure shapes the gateway must map to
 * its backend-error envelope: NaN logits, wrong arity, and timeouts.
 */

import { createServer, type Server } from "node:http";
import { logits, type Model } from "./model.js";

export type ChaosMode = "none" | "nan" | "arity" | "timeout";

function badRequest(res: import("node:http").ServerResponse, message: string): void {
  const body = JSON.stringify({ error: message });
  res.writeHead(400, { "Content-Type": "application/json" });
  res.end(body);
}

export function createBackendServer(model: Model, chaos: ChaosMode = "none"): Server {
  return createServer((req, res) => {
    if (req.method !== "POST" || req.url !== "/infer") {
      res.writeHead(404, { "Content-Type": "application/json" });
      res.end(JSON.stringify({ error: "not found" }));
      return;
    }
    let raw = "";
    req.on("data", (chunk) => {
      raw += chunk;
    });
    req.on("end", () => {
      let features: unknown;
      try {
        const body = JSON.parse(raw);
        features = (body as Record<string, unknown>).features;
      } catch {
        badRequest(res, "body must be JSON");
        return;
      }
      if (
        !Array.isArray(features) ||
        features.some((v) => typeof v !== "number" || !Number.isFinite(v))
      ) {
        badRequest(res, "features must be a flat array of finite numbers");
        return;
      }
      if (features.length !== model.inputDim) {
        badRequest(res, `expected ${model.inputDim} features, got ${features.length}`);
        return;
      }

      if (chaos === "timeout") {
        // Hold the socket open; the client's timeout does the failing.
        return;
      }
      let out = logits(model, features as number[]);
      if (chaos === "arity") {
        out = [...out, 0.0];
      }
      let body: string;
      if (chaos === "nan") {
        // NaN is not strict JSON; emit the literal the same way a sloppy
        // numeric backend would.
        body = `{"logits": [${out.map(() => "NaN").join(", ")}]}`;
      } else {
        body = JSON.stringify({ logits: out });
      }
      res.writeHead(200, { "Content-Type": "application/json" });
      res.end(body);
    });
  });
}
