/**
 * Model file loading and inference, numerically parallel to the gateway's
 * builtin models: plain loops over float64 so logits agree within 1e-9.
 */

import { readFileSync } from "node:fs";

export interface LogisticModel {
  kind: "logistic_regression";
  inputDim: number;
  numClasses: number;
  weights: number[][]; // numClasses x inputDim
  bias: number[];
}

export interface Mlp2Model {
  kind: "mlp2";
  inputDim: number;
  hiddenDim: number;
  numClasses: number;
  w1: number[][];
  b1: number[];
  w2: number[][];
  b2: number[];
}

export type Model = LogisticModel | Mlp2Model;

export class ModelFormatError extends Error {}

function numberMatrix(value: unknown, name: string): number[][] {
  if (!Array.isArray(value) || value.some((row) => !Array.isArray(row))) {
    throw new ModelFormatError(`${name} must be a matrix`);
  }
  return (value as unknown[][]).map((row) =>
    row.map((v) => {
      if (typeof v !== "number" || !Number.isFinite(v)) {
        throw new ModelFormatError(`${name} must contain finite numbers`);
      }
      return v;
    }),
  );
}

function numberVector(value: unknown, name: string): number[] {
  if (!Array.isArray(value)) throw new ModelFormatError(`${name} must be an array`);
  return value.map((v) => {
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new ModelFormatError(`${name} must contain finite numbers`);
    }
    return v;
  });
}

export function parseModel(doc: Record<string, unknown>): Model {
  if (doc.kind === "logistic_regression") {
    const weights = numberMatrix(doc.weights, "weights");
    const bias = numberVector(doc.bias, "bias");
    const inputDim = Number(doc.input_dim);
    const numClasses = Number(doc.num_classes);
    if (weights.length !== numClasses || bias.length !== numClasses) {
      throw new ModelFormatError("declared num_classes does not match weight rows");
    }
    if (weights.some((row) => row.length !== inputDim)) {
      throw new ModelFormatError("declared input_dim does not match weight columns");
    }
    return { kind: "logistic_regression", inputDim, numClasses, weights, bias };
  }
  if (doc.kind === "mlp2") {
    const w1 = numberMatrix(doc.w1, "w1");
    const b1 = numberVector(doc.b1, "b1");
    const w2 = numberMatrix(doc.w2, "w2");
    const b2 = numberVector(doc.b2, "b2");
    const inputDim = Number(doc.input_dim);
    const hiddenDim = Number(doc.hidden_dim);
    const numClasses = Number(doc.num_classes);
    if (w1.length !== hiddenDim || b1.length !== hiddenDim) {
      throw new ModelFormatError("declared hidden_dim does not match w1/b1");
    }
    if (w1.some((row) => row.length !== inputDim)) {
      throw new ModelFormatError("declared input_dim does not match w1 columns");
    }
    if (w2.length !== numClasses || b2.length !== numClasses) {
      throw new ModelFormatError("declared num_classes does not match w2/b2");
    }
    if (w2.some((row) => row.length !== hiddenDim)) {
      throw new ModelFormatError("w2 columns do not match hidden_dim");
    }
    return { kind: "mlp2", inputDim, hiddenDim, numClasses, w1, b1, w2, b2 };
  }
  throw new ModelFormatError(`unknown model kind ${String(doc.kind)}`);
}

export function loadModel(path: string): Model {
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new ModelFormatError(`cannot read model file ${path}: ${String(err)}`);
  }
  if (typeof doc !== "object" || doc === null) {
    throw new ModelFormatError(`${path}: model document must be a JSON object`);
  }
  return parseModel(doc as Record<string, unknown>);
}

function affine(weights: number[][], bias: number[], x: number[]): number[] {
  return weights.map((row, i) => {
    let acc = 0;
    for (let j = 0; j < row.length; j++) acc += row[j] * x[j];
    return acc + bias[i];
  });
}

export function logits(model: Model, x: number[]): number[] {
  if (x.length !== model.inputDim) {
    throw new ModelFormatError(`expected ${model.inputDim} features, got ${x.length}`);
  }
  if (model.kind === "logistic_regression") {
    return affine(model.weights, model.bias, x);
  }
  const hidden = affine(model.w1, model.b1, x).map((v) => (v > 0 ? v : 0));
  return affine(model.w2, model.b2, hidden);
}
