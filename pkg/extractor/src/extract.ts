/**
 * Extraction job: walk a directory of label-named subdirectories of images,
 * run each through the backbone, and write the spatial feature store, the
 * pooled feature store, the manifest CSV, and a skip log.
 *
 * Row order follows the sorted relative path; the pooled vector is the
 * per-channel spatial mean of the exact float32 map that lands on disk, so
 * pooled/spatial consistency holds by construction.
 */

import * as tf from '@tensorflow/tfjs';
import { appendFileSync, mkdirSync, readdirSync, statSync, writeFileSync } from 'fs';
import { join, relative, sep } from 'path';
import { decodeImageFile, normalize, resizeBilinear } from './image.js';
import { FeatureStore, writeLgfs } from './lgfs.js';
import { buildBackbone, loadBackbone } from './mobilenet.js';

export interface ExtractionJob {
  imageDir: string;
  outDir: string;
  inputSize?: number; // default 224
  alpha?: number; // default 1.0
  seed?: number; // default 0 (seeded weights when no checkpoint given)
  weightsPath?: string; // tfjs-layers model.json with pretrained weights
  batchSize?: number; // default 8
}

export interface ExtractResult {
  processed: number;
  skipped: Array<{ path: string; reason: string }>;
  spatialPath: string;
  pooledPath: string;
  manifestPath: string;
  skipLogPath: string;
  featureShape: number[];
}

interface ImageEntry {
  absPath: string;
  relPath: string;
  label: string;
  id: string;
}

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg']);

export function listImages(imageDir: string): ImageEntry[] {
  const entries: ImageEntry[] = [];
  const walk = (dir: string) => {
    for (const name of readdirSync(dir)) {
      const abs = join(dir, name);
      if (statSync(abs).isDirectory()) {
        walk(abs);
        continue;
      }
      const dot = name.lastIndexOf('.');
      const ext = dot >= 0 ? name.slice(dot).toLowerCase() : '';
      if (!IMAGE_EXTENSIONS.has(ext)) continue;
      const rel = relative(imageDir, abs).split(sep).join('/');
      const parts = rel.split('/');
      if (parts.length < 2) continue; // label comes from the subdirectory
      entries.push({
        absPath: abs,
        relPath: rel,
        label: parts[0],
        id: rel.slice(0, rel.length - ext.length).replace(/\//g, '__'),
      });
    }
  };
  walk(imageDir);
  entries.sort((a, b) => (a.relPath < b.relPath ? -1 : a.relPath > b.relPath ? 1 : 0));
  return entries;
}

export function manifestCsv(rows: Array<{ id: string; label: string }>): string {
  const escape = (value: string) =>
    value.includes(',') || value.includes('"')
      ? '"' + value.replace(/"/g, '""') + '"'
      : value;
  const lines = ['sample_id,label,split'];
  for (const row of rows) {
    lines.push(`${escape(row.id)},${escape(row.label)},`);
  }
  return lines.join('\n') + '\n';
}

export async function extract(job: ExtractionJob): Promise<ExtractResult> {
  const inputSize = job.inputSize ?? 224;
  const alpha = job.alpha ?? 1.0;
  const batchSize = job.batchSize ?? 8;
  mkdirSync(job.outDir, { recursive: true });
  const skipLogPath = join(job.outDir, 'skips.log');
  writeFileSync(skipLogPath, '');

  const model = job.weightsPath
    ? await loadBackbone(job.weightsPath)
    : buildBackbone({ inputSize, alpha, seed: job.seed ?? 0 });

  const all = listImages(job.imageDir);
  if (all.length === 0) {
    throw new Error(`no images under ${job.imageDir}`);
  }

  const skipped: Array<{ path: string; reason: string }> = [];
  const kept: ImageEntry[] = [];
  const tensors: Float32Array[] = [];
  for (const entry of all) {
    try {
      const decoded = decodeImageFile(entry.absPath);
      tensors.push(normalize(resizeBilinear(decoded, inputSize, inputSize)));
      kept.push(entry);
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      skipped.push({ path: entry.relPath, reason });
      appendFileSync(skipLogPath, `${entry.relPath}\t${reason}\n`);
      console.warn(`skipping ${entry.relPath}: ${reason}`);
    }
  }
  if (kept.length === 0) {
    throw new Error('every image failed to decode');
  }

  let featureShape: number[] = [];
  let spatial: Float32Array | null = null;
  let pooled: Float32Array | null = null;
  for (let start = 0; start < kept.length; start += batchSize) {
    const batch = tensors.slice(start, start + batchSize);
    const stacked = tf.tensor4d(
      concatFloat32(batch),
      [batch.length, inputSize, inputSize, 3],
    );
    const out = model.predict(stacked) as tf.Tensor4D;
    const [, fh, fw, fc] = out.shape;
    if (spatial === null) {
      featureShape = [fh, fw, fc];
      spatial = new Float32Array(kept.length * fh * fw * fc);
      pooled = new Float32Array(kept.length * fc);
    }
    const values = (await out.data()) as Float32Array;
    spatial.set(values, start * fh * fw * fc);
    stacked.dispose();
    out.dispose();

    // pooled = spatial mean per channel, straight from the stored values
    const mapSize = fh * fw;
    for (let b = 0; b < batch.length; b++) {
      const base = b * mapSize * fc;
      for (let c = 0; c < fc; c++) {
        let acc = 0;
        for (let p = 0; p < mapSize; p++) {
          acc += values[base + p * fc + c];
        }
        pooled![(start + b) * fc + c] = acc / mapSize;
      }
    }
  }

  const ids = kept.map((e) => e.id);
  const spatialStore: FeatureStore = {
    kind: 'spatial',
    dims: featureShape,
    ids,
    payload: spatial!,
  };
  const pooledStore: FeatureStore = {
    kind: 'pooled',
    dims: [featureShape[2]],
    ids,
    payload: pooled!,
  };
  const spatialPath = join(job.outDir, 'spatial.lgfs');
  const pooledPath = join(job.outDir, 'pooled.lgfs');
  const manifestPath = join(job.outDir, 'manifest.csv');
  writeLgfs(spatialStore, spatialPath);
  writeLgfs(pooledStore, pooledPath);
  writeFileSync(manifestPath, manifestCsv(kept), 'utf-8');
  return {
    processed: kept.length,
    skipped,
    spatialPath,
    pooledPath,
    manifestPath,
    skipLogPath,
    featureShape,
  };
}

function concatFloat32(chunks: Float32Array[]): Float32Array {
  const total = chunks.reduce((a, c) => a + c.length, 0);
  const out = new Float32Array(total);
  let off = 0;
  for (const chunk of chunks) {
    out.set(chunk, off);
    off += chunk.length;
  }
  return out;
}
