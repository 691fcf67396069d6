/**
 * Checkpoint -> container conversion.
 *
 * Reads a tfjs layers-model checkpoint, refuses topologies with ops the
 * container cannot represent, permutes every mapped tensor into container
 * layout bit-for-bit, and writes manifest.json + weights.pfpw.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { encodeBlob, type NamedTensor } from './blob.js';
import { type ExportRecipe } from './recipe.js';
import { readCheckpoint, scanUnsupportedOps } from './tfjs.js';
import { asNamedTensor } from './transpose.js';

export interface ExportResult {
  manifestPath: string;
  blobPath: string;
  tensorCount: number;
}

export function exportCheckpoint(checkpointDir: string, recipe: ExportRecipe, outDir: string): ExportResult {
  const checkpoint = readCheckpoint(checkpointDir);
  const unsupported = scanUnsupportedOps(checkpoint.topology);
  if (unsupported.length > 0) {
    throw new Error(`checkpoint uses unsupported ops: ${unsupported.join(', ')}`);
  }

  const tensors: NamedTensor[] = [];
  for (const rule of recipe.tensors) {
    const source = checkpoint.weights.get(rule.source);
    if (!source) {
      throw new Error(`checkpoint has no weight '${rule.source}' (wanted for '${rule.target}')`);
    }
    tensors.push(asNamedTensor(rule.target, rule.layout, source.shape, source.data));
  }

  const manifest = {
    format_version: 1,
    input_shape: recipe.input_shape,
    flatten_order: recipe.flatten_order,
    weight_blob: 'weights.pfpw',
    nodes: recipe.nodes,
  };

  fs.mkdirSync(outDir, { recursive: true });
  const blobPath = path.join(outDir, 'weights.pfpw');
  const manifestPath = path.join(outDir, 'manifest.json');
  fs.writeFileSync(blobPath, encodeBlob(tensors));
  fs.writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + '\n');
  return { manifestPath, blobPath, tensorCount: tensors.length };
}
