/**
 * Deterministic seed derivation (splitmix64 over BigInt). Each named layer
 * gets its own 31-bit initializer seed so a single master seed fixes every
 * weight in the backbone.
 */

const MASK = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

function mix64(z: bigint): bigint {
  z = ((z ^ (z >> 30n)) * MIX1) & MASK;
  z = ((z ^ (z >> 27n)) * MIX2) & MASK;
  return z ^ (z >> 31n);
}

function fnv1a(label: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (const byte of Buffer.from(label, 'utf-8')) {
    h = ((h ^ BigInt(byte)) * 0x100000001b3n) & MASK;
  }
  return h;
}

export class SeedSequence {
  private readonly seed: bigint;

  constructor(seed: number | bigint) {
    this.seed = BigInt(seed) & MASK;
  }

  /** 31-bit non-negative seed for a named layer initializer. */
  layerSeed(label: string): number {
    const mixed = mix64(((this.seed ^ fnv1a(label)) + GOLDEN) & MASK);
    return Number(mixed & 0x7fffffffn);
  }
}
