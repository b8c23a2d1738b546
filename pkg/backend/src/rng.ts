/**
 * Seeded PRNG so dataset generation is byte-reproducible.
 *
 * mulberry32 for uniforms, Box-Muller for normals. Not cryptographic; it
 * only has to be deterministic and well mixed at fixture scale.
 */

export type Rng = () => number;

export function mulberry32(seed: number): Rng {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Standard normal via Box-Muller; consumes two uniforms per pair. */
export function gaussianPair(rng: Rng): [number, number] {
  let u = 0;
  let v = 0;
  while (u === 0) u = rng(); // (0,1]: log(0) is -inf
  while (v === 0) v = rng();
  const r = Math.sqrt(-2.0 * Math.log(u));
  return [r * Math.cos(2 * Math.PI * v), r * Math.sin(2 * Math.PI * v)];
}

export function gaussians(rng: Rng, n: number, mean: number, sigma: number): number[] {
  const out: number[] = [];
  while (out.length < n) {
    const [a, b] = gaussianPair(rng);
    out.push(mean + sigma * a);
    if (out.length < n) out.push(mean + sigma * b);
  }
  return out;
}
