/**
 * Backend CLI.
 *
 *   cli.js serve --model model.json [--port 0] [--chaos none|nan|arity|timeout]
 *   cli.js gen --out data.csv --mean0 -3,-3 --mean1 3,3 [--sigma 0.5]
 *              [--n 200] [--seed 0]
 *
 * `serve` prints "LISTENING <port>" once bound so callers using --port 0
 * can discover the ephemeral port.
 */

import { writeDataset } from "./gendata.js";
import { loadModel } from "./model.js";
import { createBackendServer, type ChaosMode } from "./server.js";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key?.startsWith("--") || value === undefined) {
      throw new Error(`malformed flags near ${key ?? "<end>"}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const v = flags.get(name);
  if (v === undefined) throw new Error(`missing required flag --${name}`);
  return v;
}

function parseVector(text: string): number[] {
  const out = text.split(",").map((v) => Number(v));
  if (out.length === 0 || out.some((v) => !Number.isFinite(v))) {
    throw new Error(`cannot parse vector ${text}`);
  }
  return out;
}

function runServe(flags: Map<string, string>): void {
  const model = loadModel(need(flags, "model"));
  const port = Number(flags.get("port") ?? "8100");
  const chaos = (flags.get("chaos") ?? "none") as ChaosMode;
  if (!["none", "nan", "arity", "timeout"].includes(chaos)) {
    throw new Error(`unknown chaos mode ${chaos}`);
  }
  const server = createBackendServer(model, chaos);
  server.listen(port, "127.0.0.1", () => {
    const address = server.address();
    const bound = typeof address === "object" && address ? address.port : port;
    console.log(`LISTENING ${bound}`);
    console.log(`model=${model.kind} input_dim=${model.inputDim} chaos=${chaos}`);
  });
}

function runGen(flags: Map<string, string>): void {
  const rows = writeDataset(need(flags, "out"), {
    mean0: parseVector(need(flags, "mean0")),
    mean1: parseVector(need(flags, "mean1")),
    sigma: Number(flags.get("sigma") ?? "0.5"),
    nPerClass: Number(flags.get("n") ?? "200"),
    seed: Number(flags.get("seed") ?? "0"),
  });
  console.log(`wrote ${rows} rows to ${flags.get("out")}`);
}

function main(): void {
  const [command, ...rest] = process.argv.slice(2);
  try {
    const flags = parseFlags(rest);
    if (command === "serve") runServe(flags);
    else if (command === "gen") runGen(flags);
    else throw new Error(`usage: cli.js serve|gen --flags (got ${command ?? "nothing"})`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(2);
  }
}

main();
