/**
 * TensorFlow.js layers-model checkpoint reader.
 *
 * A checkpoint directory holds model.json (topology + weightsManifest) and
 * one or more binary weight shards.  Weights of one manifest group are laid
 * out back to back in its concatenated shards, in declaration order.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export interface SourceWeight {
  shape: number[];
  data: Float32Array;
}

export interface Checkpoint {
  topology: unknown;
  weights: Map<string, SourceWeight>;
}

interface WeightSpec {
  name: string;
  shape: number[];
  dtype: string;
}

interface ManifestGroup {
  paths: string[];
  weights: WeightSpec[];
}

/** Layer classes the container's op set can represent. */
const SUPPORTED_LAYERS = new Set([
  'InputLayer',
  'Conv2D',
  'Dense',
  'Add',
  'MaxPooling2D',
  'AveragePooling2D',
  'GlobalAveragePooling2D',
  'Flatten',
  'BatchNormalization',
  'Activation',
  'ReLU',
  'Softmax',
  'Dropout',
  'ZeroPadding2D',
]);

export function scanUnsupportedOps(topology: unknown): string[] {
  const layers = extractLayers(topology);
  const bad: string[] = [];
  for (const layer of layers) {
    const cls = String(layer.class_name ?? '');
    if (!SUPPORTED_LAYERS.has(cls)) {
      bad.push(cls);
    } else if (cls === 'Conv2D') {
      const groups = (layer.config as Record<string, unknown>)?.groups;
      if (typeof groups === 'number' && groups > 1) {
        bad.push(`Conv2D(groups=${groups})`);
      }
    }
  }
  return [...new Set(bad)];
}

function extractLayers(topology: unknown): Array<{ class_name?: unknown; config?: unknown }> {
  if (!topology || typeof topology !== 'object') {
    return [];
  }
  const modelConfig = (topology as Record<string, any>).model_config ?? topology;
  const config = modelConfig?.config ?? modelConfig;
  const layers = config?.layers;
  return Array.isArray(layers) ? layers : [];
}

export function readCheckpoint(dir: string): Checkpoint {
  const modelPath = path.join(dir, 'model.json');
  const model = JSON.parse(fs.readFileSync(modelPath, 'utf-8'));
  const manifest: ManifestGroup[] = model.weightsManifest;
  if (!Array.isArray(manifest)) {
    throw new Error(`${modelPath} has no weightsManifest`);
  }
  const weights = new Map<string, SourceWeight>();
  for (const group of manifest) {
    const shards = group.paths.map((p) => fs.readFileSync(path.join(dir, p)));
    const buf = Buffer.concat(shards);
    let offset = 0;
    for (const spec of group.weights) {
      if (spec.dtype !== 'float32') {
        throw new Error(`weight '${spec.name}': unsupported dtype '${spec.dtype}'`);
      }
      const n = spec.shape.reduce((a, b) => a * b, 1);
      if (offset + 4 * n > buf.length) {
        throw new Error(`weight '${spec.name}': shard data truncated`);
      }
      const data = new Float32Array(n);
      for (let i = 0; i < n; i += 1) {
        data[i] = buf.readFloatLE(offset + 4 * i);
      }
      offset += 4 * n;
      if (weights.has(spec.name)) {
        throw new Error(`duplicate weight name '${spec.name}'`);
      }
      weights.set(spec.name, { shape: spec.shape, data });
    }
    if (offset !== buf.length) {
      throw new Error(`weight group [${group.paths}] has ${buf.length - offset} unread bytes`);
    }
  }
  return { topology: model.modelTopology ?? null, weights };
}
