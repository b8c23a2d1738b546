/**
 * Synthetic two-class Gaussian datasets in the gateway's CSV schema
 * (header f0..f{d-1},label). Seeded, so files are byte-reproducible.
 */

import { writeFileSync } from "node:fs";
import { gaussians, mulberry32 } from "./rng.js";

export interface GenSpec {
  mean0: number[];
  mean1: number[];
  sigma: number;
  nPerClass: number;
  seed: number;
}

export function generateRows(spec: GenSpec): { features: number[][]; labels: number[] } {
  const d = spec.mean0.length;
  if (spec.mean1.length !== d) throw new Error("class means must share a dimension");
  if (spec.sigma <= 0) throw new Error("sigma must be positive");
  if (spec.nPerClass < 1) throw new Error("n_per_class must be positive");
  const rng = mulberry32(spec.seed);
  const features: number[][] = [];
  const labels: number[] = [];
  for (const [label, mean] of [spec.mean0, spec.mean1].entries()) {
    // draw feature-by-feature so row count changes never reshuffle columns
    const columns = mean.map((m) => gaussians(rng, spec.nPerClass, m, spec.sigma));
    for (let i = 0; i < spec.nPerClass; i++) {
      features.push(columns.map((col) => col[i]));
      labels.push(label);
    }
  }
  return { features, labels };
}

export function toCsv(features: number[][], labels: number[]): string {
  const d = features[0]?.length ?? 0;
  const header = [...Array.from({ length: d }, (_, i) => `f${i}`), "label"].join(",");
  const lines = features.map((row, i) => [...row.map((v) => String(v)), labels[i]].join(","));
  return [header, ...lines].join("\n") + "\n";
}

export function writeDataset(path: string, spec: GenSpec): number {
  const { features, labels } = generateRows(spec);
  writeFileSync(path, toCsv(features, labels), "utf-8");
  return features.length;
}

/** Smallest distance between any cross-class pair; > 0 means separable. */
export function minInterClassMargin(features: number[][], labels: number[]): number {
  let best = Infinity;
  for (let i = 0; i < features.length; i++) {
    if (labels[i] !== 0) continue;
    for (let j = 0; j < features.length; j++) {
      if (labels[j] !== 1) continue;
      let acc = 0;
      for (let k = 0; k < features[i].length; k++) {
        const dv = features[i][k] - features[j][k];
        acc += dv * dv;
      }
      best = Math.min(best, Math.sqrt(acc));
    }
  }
  return best;
}
