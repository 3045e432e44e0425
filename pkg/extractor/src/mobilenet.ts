/**
 * MobileNetV2 backbone built with tfjs layers, truncated at the last
 * convolutional activation (the H' x W' x 1280 feature map that feeds the
 * graph pipeline).
 *
 * Weights: either deterministic seeded initialization (the default; good for
 * tests and for environments without access to pretrained checkpoints) or a
 * tfjs-layers model loaded from disk with --weights.  Only the emitted LGFS
 * bytes are contractual, so any backbone delivering a (H', W', C') map fits.
 */

import * as tf from '@tensorflow/tfjs';
import { readFileSync } from 'fs';
import { dirname, join } from 'path';
import { SeedSequence } from './rng.js';

/** Keras-style channel rounding: divisible by 8, never below 90% of target. */
export function roundFilters(filters: number, alpha: number): number {
  const scaled = filters * alpha;
  let rounded = Math.max(8, Math.floor(scaled + 4) - (Math.floor(scaled + 4) % 8));
  if (rounded < 0.9 * scaled) rounded += 8;
  return rounded;
}

// inverted residual spec: [expansion, channels, repeats, first stride]
const BLOCKS: Array<[number, number, number, number]> = [
  [1, 16, 1, 1],
  [6, 24, 2, 2],
  [6, 32, 3, 2],
  [6, 64, 4, 2],
  [6, 96, 3, 1],
  [6, 160, 3, 2],
  [6, 320, 1, 1],
];

export interface BackboneOptions {
  inputSize: number;
  alpha: number;
  seed: number;
}

export function buildBackbone(opts: BackboneOptions): tf.LayersModel {
  const seeds = new SeedSequence(opts.seed);
  const init = (label: string) =>
    tf.initializers.glorotUniform({ seed: seeds.layerSeed(label) });

  const input = tf.input({ shape: [opts.inputSize, opts.inputSize, 3] });
  let x = tf.layers
    .conv2d({
      filters: roundFilters(32, opts.alpha),
      kernelSize: 3,
      strides: 2,
      padding: 'same',
      useBias: false,
      kernelInitializer: init('stem'),
      name: 'stem_conv',
    })
    .apply(input) as tf.SymbolicTensor;
  x = tf.layers.batchNormalization({ name: 'stem_bn' }).apply(x) as tf.SymbolicTensor;
  x = tf.layers.reLU({ maxValue: 6, name: 'stem_relu' }).apply(x) as tf.SymbolicTensor;

  let channels = roundFilters(32, opts.alpha);
  let blockId = 0;
  for (const [expansion, targetChannels, repeats, firstStride] of BLOCKS) {
    const outChannels = roundFilters(targetChannels, opts.alpha);
    for (let r = 0; r < repeats; r++) {
      const stride = r === 0 ? firstStride : 1;
      const name = `block${blockId}`;
      let y = x;
      if (expansion !== 1) {
        y = tf.layers
          .conv2d({
            filters: channels * expansion,
            kernelSize: 1,
            useBias: false,
            kernelInitializer: init(`${name}_expand`),
            name: `${name}_expand`,
          })
          .apply(y) as tf.SymbolicTensor;
        y = tf.layers
          .batchNormalization({ name: `${name}_expand_bn` })
          .apply(y) as tf.SymbolicTensor;
        y = tf.layers
          .reLU({ maxValue: 6, name: `${name}_expand_relu` })
          .apply(y) as tf.SymbolicTensor;
      }
      y = tf.layers
        .depthwiseConv2d({
          kernelSize: 3,
          strides: stride,
          padding: 'same',
          useBias: false,
          depthwiseInitializer: init(`${name}_dw`),
          name: `${name}_dw`,
        })
        .apply(y) as tf.SymbolicTensor;
      y = tf.layers
        .batchNormalization({ name: `${name}_dw_bn` })
        .apply(y) as tf.SymbolicTensor;
      y = tf.layers
        .reLU({ maxValue: 6, name: `${name}_dw_relu` })
        .apply(y) as tf.SymbolicTensor;
      y = tf.layers
        .conv2d({
          filters: outChannels,
          kernelSize: 1,
          useBias: false,
          kernelInitializer: init(`${name}_project`),
          name: `${name}_project`,
        })
        .apply(y) as tf.SymbolicTensor;
      y = tf.layers
        .batchNormalization({ name: `${name}_project_bn` })
        .apply(y) as tf.SymbolicTensor;
      if (stride === 1 && channels === outChannels) {
        y = tf.layers
          .add({ name: `${name}_residual` })
          .apply([x, y]) as tf.SymbolicTensor;
      }
      x = y;
      channels = outChannels;
      blockId += 1;
    }
  }

  // the final 1x1 conv keeps 1280 channels for alpha <= 1 (standard)
  const headChannels = opts.alpha > 1 ? roundFilters(1280, opts.alpha) : 1280;
  x = tf.layers
    .conv2d({
      filters: headChannels,
      kernelSize: 1,
      useBias: false,
      kernelInitializer: init('head'),
      name: 'head_conv',
    })
    .apply(x) as tf.SymbolicTensor;
  x = tf.layers.batchNormalization({ name: 'head_bn' }).apply(x) as tf.SymbolicTensor;
  x = tf.layers.reLU({ maxValue: 6, name: 'head_relu' }).apply(x) as tf.SymbolicTensor;

  return tf.model({ inputs: input, outputs: x, name: 'mobilenetv2_features' });
}

/** Minimal file IO handler so tf.loadLayersModel works without tfjs-node. */
export function fileIoHandler(modelJsonPath: string): tf.io.IOHandler {
  return {
    load: async () => {
      const spec = JSON.parse(readFileSync(modelJsonPath, 'utf-8'));
      const dir = dirname(modelJsonPath);
      const manifest = spec.weightsManifest ?? [];
      const specs: tf.io.WeightsManifestEntry[] = [];
      const buffers: Buffer[] = [];
      for (const group of manifest) {
        specs.push(...group.weights);
        for (const rel of group.paths) {
          buffers.push(readFileSync(join(dir, rel)));
        }
      }
      const data = Buffer.concat(buffers);
      return {
        modelTopology: spec.modelTopology,
        weightSpecs: specs,
        weightData: data.buffer.slice(
          data.byteOffset,
          data.byteOffset + data.byteLength,
        ),
      };
    },
  };
}

export async function loadBackbone(modelJsonPath: string): Promise<tf.LayersModel> {
  return tf.loadLayersModel(fileIoHandler(modelJsonPath));
}
