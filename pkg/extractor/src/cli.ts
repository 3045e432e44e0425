#!/usr/bin/env node
/**
 * leafgraph-extract --images <dir> --out <dir> [--size 224] [--alpha 1.0]
 *                   [--seed 0] [--weights model.json] [--batch 8]
 *
 * Images live in label-named subdirectories (<dir>/<label>/<file>.png|jpg).
 * Emits spatial.lgfs + pooled.lgfs (+ .ids.csv siblings), manifest.csv, and
 * skips.log into the output directory.
 */

import { extract } from './extract.js';

function parseArgs(argv: string[]): Record<string, string> {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith('--') || i + 1 >= argv.length) {
      throw new Error(`bad argument ${key}`);
    }
    args[key.slice(2)] = argv[i + 1];
  }
  return args;
}

async function main(): Promise<number> {
  let args: Record<string, string>;
  try {
    args = parseArgs(process.argv.slice(2));
    if (!args.images || !args.out) throw new Error('--images and --out are required');
  } catch (err) {
    console.error(String(err));
    console.error(
      'usage: leafgraph-extract --images <dir> --out <dir> [--size N] ' +
        '[--alpha A] [--seed S] [--weights model.json] [--batch B]',
    );
    return 1;
  }
  const result = await extract({
    imageDir: args.images,
    outDir: args.out,
    inputSize: args.size ? parseInt(args.size, 10) : undefined,
    alpha: args.alpha ? parseFloat(args.alpha) : undefined,
    seed: args.seed ? parseInt(args.seed, 10) : undefined,
    weightsPath: args.weights,
    batchSize: args.batch ? parseInt(args.batch, 10) : undefined,
  });
  console.log(
    JSON.stringify({
      processed: result.processed,
      skipped: result.skipped.length,
      feature_shape: result.featureShape,
      spatial: result.spatialPath,
      pooled: result.pooledPath,
      manifest: result.manifestPath,
    }),
  );
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(err instanceof Error ? err.message : String(err));
    process.exit(2);
  },
);
