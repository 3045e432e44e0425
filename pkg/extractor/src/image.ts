/**
 * Image decoding (PNG via pngjs, JPEG via jpeg-js) and preprocessing:
 * bilinear resize with half-pixel centers and edge clamping, then scaling
 * into [0, 1].
 */

import { readFileSync } from 'fs';
import { extname } from 'path';
import { PNG } from 'pngjs';
import jpeg from 'jpeg-js';

export interface DecodedImage {
  width: number;
  height: number;
  /** RGB, row-major, 3 bytes per pixel */
  data: Uint8Array;
}

export function decodeImageFile(path: string): DecodedImage {
  const raw = readFileSync(path);
  const ext = extname(path).toLowerCase();
  if (ext === '.png') {
    const png = PNG.sync.read(raw);
    return { width: png.width, height: png.height, data: dropAlpha(png.data) };
  }
  if (ext === '.jpg' || ext === '.jpeg') {
    const img = jpeg.decode(raw, { useTArray: true });
    return { width: img.width, height: img.height, data: dropAlpha(img.data) };
  }
  throw new Error(`unsupported image extension ${ext}`);
}

function dropAlpha(rgba: Uint8Array | Buffer): Uint8Array {
  const pixels = rgba.length / 4;
  const rgb = new Uint8Array(pixels * 3);
  for (let i = 0; i < pixels; i++) {
    rgb[3 * i] = rgba[4 * i];
    rgb[3 * i + 1] = rgba[4 * i + 1];
    rgb[3 * i + 2] = rgba[4 * i + 2];
  }
  return rgb;
}

/** Bilinear resize to (outH, outW); returns HWC float32 values in [0, 255]. */
export function resizeBilinear(
  img: DecodedImage,
  outH: number,
  outW: number,
): Float32Array {
  const { width: w, height: h, data } = img;
  const out = new Float32Array(outH * outW * 3);
  const sx = w / outW;
  const sy = h / outH;
  for (let y = 0; y < outH; y++) {
    let srcY = (y + 0.5) * sy - 0.5;
    if (srcY < 0) srcY = 0;
    if (srcY > h - 1) srcY = h - 1;
    const y0 = Math.floor(srcY);
    const y1 = Math.min(y0 + 1, h - 1);
    const fy = srcY - y0;
    for (let x = 0; x < outW; x++) {
      let srcX = (x + 0.5) * sx - 0.5;
      if (srcX < 0) srcX = 0;
      if (srcX > w - 1) srcX = w - 1;
      const x0 = Math.floor(srcX);
      const x1 = Math.min(x0 + 1, w - 1);
      const fx = srcX - x0;
      for (let c = 0; c < 3; c++) {
        const p00 = data[(y0 * w + x0) * 3 + c];
        const p01 = data[(y0 * w + x1) * 3 + c];
        const p10 = data[(y1 * w + x0) * 3 + c];
        const p11 = data[(y1 * w + x1) * 3 + c];
        const top = p00 * (1 - fx) + p01 * fx;
        const bot = p10 * (1 - fx) + p11 * fx;
        out[(y * outW + x) * 3 + c] = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

/** Scale [0, 255] pixel values down to [0, 1] in place-free fashion. */
export function normalize(pixels: Float32Array): Float32Array {
  const out = new Float32Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) {
    out[i] = pixels[i] / 255;
  }
  return out;
}
