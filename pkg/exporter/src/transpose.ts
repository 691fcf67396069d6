/**
 * Tensor layout permutations between framework conventions and the
 * container's (n_out, n_in, k_h, k_w) / (out, in) layouts.  Values are
 * moved bit-for-bit; only their order changes.
 */

import type { NamedTensor } from './blob.js';

/** Keras/TF conv kernels are (k_h, k_w, in, out); the container wants (out, in, k_h, k_w). */
export function convHwioToOihw(dims: number[], data: Float32Array): { dims: number[]; data: Float32Array } {
  if (dims.length !== 4) {
    throw new Error(`conv kernel must be rank 4, got [${dims}]`);
  }
  const [kh, kw, cin, cout] = dims;
  const out = new Float32Array(data.length);
  for (let y = 0; y < kh; y += 1) {
    for (let x = 0; x < kw; x += 1) {
      for (let i = 0; i < cin; i += 1) {
        for (let o = 0; o < cout; o += 1) {
          const src = ((y * kw + x) * cin + i) * cout + o;
          const dst = ((o * cin + i) * kh + y) * kw + x;
          out[dst] = data[src];
        }
      }
    }
  }
  return { dims: [cout, cin, kh, kw], data: out };
}

/** Keras/TF dense kernels are (in, out); the container wants (out, in). */
export function denseIoToOi(dims: number[], data: Float32Array): { dims: number[]; data: Float32Array } {
  if (dims.length !== 2) {
    throw new Error(`dense kernel must be rank 2, got [${dims}]`);
  }
  const [inF, outF] = dims;
  const out = new Float32Array(data.length);
  for (let i = 0; i < inF; i += 1) {
    for (let o = 0; o < outF; o += 1) {
      out[o * inF + i] = data[i * outF + o];
    }
  }
  return { dims: [outF, inF], data: out };
}

export type Layout = 'conv_hwio' | 'dense_io' | 'vector';

export function applyLayout(layout: Layout, tensor: { dims: number[]; data: Float32Array }): {
  dims: number[];
  data: Float32Array;
} {
  switch (layout) {
    case 'conv_hwio':
      return convHwioToOihw(tensor.dims, tensor.data);
    case 'dense_io':
      return denseIoToOi(tensor.dims, tensor.data);
    case 'vector':
      if (tensor.dims.length !== 1) {
        throw new Error(`vector tensor must be rank 1, got [${tensor.dims}]`);
      }
      return { dims: [...tensor.dims], data: tensor.data };
    default:
      throw new Error(`unknown layout '${layout satisfies never}'`);
  }
}

export function asNamedTensor(name: string, layout: Layout, dims: number[], data: Float32Array): NamedTensor {
  const converted = applyLayout(layout, { dims, data });
  return { name, dims: converted.dims, data: converted.data };
}
