/**
 * Export recipes: one per supported architecture, versioned in-repo.
 *
 * A recipe pins everything the conversion needs: the target graph (manifest
 * nodes verbatim), the input shape, the flatten interleaving the source
 * framework used, and a source-name -> container-name mapping with the
 * layout rule for each tensor.  There is no automatic graph tracing.
 */

import * as fs from 'node:fs';

import type { Layout } from './transpose.js';

export interface ManifestNode {
  id: string;
  op_kind: string;
  inputs: string[];
  attrs?: Record<string, unknown>;
  weight_refs?: Record<string, string>;
}

export interface TensorRule {
  source: string;
  target: string;
  layout: Layout;
}

export interface ExportRecipe {
  source_format: 'tfjs-layers';
  input_shape: [number, number, number];
  flatten_order: 'channel_last' | 'channel_first';
  nodes: ManifestNode[];
  tensors: TensorRule[];
}

const LAYOUTS = new Set(['conv_hwio', 'dense_io', 'vector']);

export function validateRecipe(data: unknown): ExportRecipe {
  const r = data as ExportRecipe;
  if (r.source_format !== 'tfjs-layers') {
    throw new Error(`recipe: unsupported source_format '${(r as any).source_format}'`);
  }
  if (!Array.isArray(r.input_shape) || r.input_shape.length !== 3) {
    throw new Error('recipe: input_shape must be [C, H, W]');
  }
  if (r.flatten_order !== 'channel_last' && r.flatten_order !== 'channel_first') {
    throw new Error(`recipe: unknown flatten_order '${r.flatten_order}'`);
  }
  if (!Array.isArray(r.nodes) || r.nodes.length === 0) {
    throw new Error('recipe: nodes list is empty');
  }
  if (!Array.isArray(r.tensors)) {
    throw new Error('recipe: tensors list missing');
  }
  const targets = new Set<string>();
  for (const rule of r.tensors) {
    if (!rule.source || !rule.target) {
      throw new Error(`recipe: tensor rule needs source and target: ${JSON.stringify(rule)}`);
    }
    if (!LAYOUTS.has(rule.layout)) {
      throw new Error(`recipe: tensor '${rule.source}': unknown layout '${rule.layout}'`);
    }
    if (targets.has(rule.target)) {
      throw new Error(`recipe: duplicate target tensor '${rule.target}'`);
    }
    targets.add(rule.target);
  }
  const referenced = new Set<string>();
  for (const node of r.nodes) {
    for (const name of Object.values(node.weight_refs ?? {})) {
      referenced.add(name);
    }
  }
  for (const name of referenced) {
    if (!targets.has(name)) {
      throw new Error(`recipe: node weight_ref '${name}' has no tensor rule producing it`);
    }
  }
  return r;
}

export function loadRecipe(path: string): ExportRecipe {
  return validateRecipe(JSON.parse(fs.readFileSync(path, 'utf-8')));
}
