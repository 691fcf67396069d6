import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';
import { spawnSync } from 'node:child_process';
import { fileURLToPath } from 'node:url';

import { describe, expect, it } from 'vitest';

import { decodeBlob, encodeBlob } from '../src/blob.js';
import { exportCheckpoint } from '../src/export.js';
import { loadRecipe } from '../src/recipe.js';
import { readCheckpoint, scanUnsupportedOps } from '../src/tfjs.js';
import { convHwioToOihw, denseIoToOi } from '../src/transpose.js';

const here = path.dirname(fileURLToPath(import.meta.url));
const recipePath = path.join(here, '..', 'recipes', 'dcase21.json');

function tmpDir(prefix: string): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), prefix));
}

/** Deterministic pseudo-random floats, good enough for layout tests. */
function fill(n: number, seed: number): Float32Array {
  const out = new Float32Array(n);
  let state = seed >>> 0;
  for (let i = 0; i < n; i += 1) {
    state = (state * 1664525 + 1013904223) >>> 0;
    out[i] = (state / 2 ** 32) * 2 - 1;
  }
  return out;
}

interface WeightDef {
  name: string;
  shape: number[];
}

/** Write a synthetic tfjs layers-model checkpoint, split into two shards. */
function writeCheckpoint(dir: string, defs: WeightDef[], layers: unknown[]): Map<string, Float32Array> {
  const values = new Map<string, Float32Array>();
  const buffers: Buffer[] = [];
  for (const [i, def] of defs.entries()) {
    const n = def.shape.reduce((a, b) => a * b, 1);
    const data = fill(n, 1000 + i);
    values.set(def.name, data);
    const buf = Buffer.alloc(4 * n);
    for (let v = 0; v < n; v += 1) {
      buf.writeFloatLE(data[v], 4 * v);
    }
    buffers.push(buf);
  }
  const payload = Buffer.concat(buffers);
  const half = Math.floor(payload.length / 8) * 4;
  fs.writeFileSync(path.join(dir, 'group1-shard1of2.bin'), payload.subarray(0, half));
  fs.writeFileSync(path.join(dir, 'group1-shard2of2.bin'), payload.subarray(half));
  const model = {
    format: 'layers-model',
    modelTopology: { model_config: { class_name: 'Sequential', config: { layers } } },
    weightsManifest: [
      {
        paths: ['group1-shard1of2.bin', 'group1-shard2of2.bin'],
        weights: defs.map((d) => ({ name: d.name, shape: d.shape, dtype: 'float32' })),
      },
    ],
  };
  fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify(model));
  return values;
}

const DCASE_LAYERS = [
  { class_name: 'InputLayer', config: {} },
  { class_name: 'Conv2D', config: { filters: 16, kernel_size: [7, 7], groups: 1 } },
  { class_name: 'BatchNormalization', config: {} },
  { class_name: 'Activation', config: { activation: 'relu' } },
  { class_name: 'Conv2D', config: { filters: 16, kernel_size: [7, 7], groups: 1 } },
  { class_name: 'BatchNormalization', config: {} },
  { class_name: 'Activation', config: { activation: 'relu' } },
  { class_name: 'MaxPooling2D', config: { pool_size: [5, 5] } },
  { class_name: 'Conv2D', config: { filters: 32, kernel_size: [7, 7], groups: 1 } },
  { class_name: 'BatchNormalization', config: {} },
  { class_name: 'Activation', config: { activation: 'relu' } },
  { class_name: 'MaxPooling2D', config: { pool_size: [4, 100] } },
  { class_name: 'Flatten', config: {} },
  { class_name: 'Dense', config: { units: 100 } },
  { class_name: 'Dropout', config: { rate: 0.3 } },
  { class_name: 'Dense', config: { units: 10 } },
];

function bnDefs(suffix: string, ch: number): WeightDef[] {
  const base = suffix ? `batch_normalization_${suffix}` : 'batch_normalization';
  return [
    { name: `${base}/gamma`, shape: [ch] },
    { name: `${base}/beta`, shape: [ch] },
    { name: `${base}/moving_mean`, shape: [ch] },
    { name: `${base}/moving_variance`, shape: [ch] },
  ];
}

const DCASE_WEIGHTS: WeightDef[] = [
  { name: 'conv2d/kernel', shape: [7, 7, 1, 16] },
  { name: 'conv2d/bias', shape: [16] },
  ...bnDefs('', 16),
  { name: 'conv2d_1/kernel', shape: [7, 7, 16, 16] },
  { name: 'conv2d_1/bias', shape: [16] },
  ...bnDefs('1', 16),
  { name: 'conv2d_2/kernel', shape: [7, 7, 16, 32] },
  { name: 'conv2d_2/bias', shape: [32] },
  ...bnDefs('2', 32),
  { name: 'dense/kernel', shape: [64, 100] },
  { name: 'dense/bias', shape: [100] },
  { name: 'dense_1/kernel', shape: [100, 10] },
  { name: 'dense_1/bias', shape: [10] },
];

describe('layout transposition', () => {
  it('maps HWIO conv kernels to OIHW element by element', () => {
    const [kh, kw, cin, cout] = [2, 3, 2, 4];
    const data = fill(kh * kw * cin * cout, 7);
    const { dims, data: out } = convHwioToOihw([kh, kw, cin, cout], data);
    expect(dims).toEqual([cout, cin, kh, kw]);
    for (let y = 0; y < kh; y += 1)
      for (let x = 0; x < kw; x += 1)
        for (let i = 0; i < cin; i += 1)
          for (let o = 0; o < cout; o += 1) {
            const src = data[((y * kw + x) * cin + i) * cout + o];
            const dst = out[((o * cin + i) * kh + y) * kw + x];
            expect(dst).toBe(src);
          }
  });

  it('transposes dense kernels from (in, out) to (out, in)', () => {
    const data = Float32Array.from([1, 2, 3, 4, 5, 6]); // (3, 2)
    const { dims, data: out } = denseIoToOi([3, 2], data);
    expect(dims).toEqual([2, 3]);
    expect([...out]).toEqual([1, 3, 5, 2, 4, 6]);
  });
});

describe('blob format', () => {
  it('round-trips tensors bit-exactly and sorts by name', () => {
    const tensors = [
      { name: 'z', dims: [2, 2], data: fill(4, 1) },
      { name: 'a', dims: [3], data: fill(3, 2) },
    ];
    const decoded = decodeBlob(encodeBlob(tensors));
    expect(decoded.map((t) => t.name)).toEqual(['a', 'z']);
    expect(Buffer.from(decoded[1].data.buffer)).toEqual(Buffer.from(tensors[0].data.buffer));
  });

  it('rejects trailing bytes', () => {
    const blob = encodeBlob([{ name: 't', dims: [1], data: fill(1, 3) }]);
    expect(() => decodeBlob(Buffer.concat([blob, Buffer.alloc(1)]))).toThrow(/trailing/);
  });

  it('rejects truncation', () => {
    const blob = encodeBlob([{ name: 't', dims: [4], data: fill(4, 4) }]);
    expect(() => decodeBlob(blob.subarray(0, blob.length - 2))).toThrow(/truncated/);
  });
});

describe('checkpoint reading', () => {
  it('reassembles weights across shards', () => {
    const dir = tmpDir('ckpt-');
    const values = writeCheckpoint(dir, DCASE_WEIGHTS, DCASE_LAYERS);
    const checkpoint = readCheckpoint(dir);
    expect(checkpoint.weights.size).toBe(DCASE_WEIGHTS.length);
    const kernel = checkpoint.weights.get('conv2d_2/kernel')!;
    expect(kernel.shape).toEqual([7, 7, 16, 32]);
    expect([...kernel.data]).toEqual([...values.get('conv2d_2/kernel')!]);
  });

  it('flags unsupported layer classes', () => {
    const bad = scanUnsupportedOps({
      model_config: {
        config: {
          layers: [
            { class_name: 'Conv2D', config: { groups: 1 } },
            { class_name: 'DepthwiseConv2D', config: {} },
            { class_name: 'LSTM', config: {} },
          ],
        },
      },
    });
    expect(bad).toContain('DepthwiseConv2D');
    expect(bad).toContain('LSTM');
  });

  it('flags grouped convolutions', () => {
    const bad = scanUnsupportedOps({
      model_config: { config: { layers: [{ class_name: 'Conv2D', config: { groups: 4 } }] } },
    });
    expect(bad).toEqual(['Conv2D(groups=4)']);
  });
});

describe('export', () => {
  it('refuses checkpoints with unsupported ops', () => {
    const dir = tmpDir('ckpt-');
    writeCheckpoint(dir, DCASE_WEIGHTS, [
      ...DCASE_LAYERS,
      { class_name: 'DepthwiseConv2D', config: {} },
    ]);
    const recipe = loadRecipe(recipePath);
    expect(() => exportCheckpoint(dir, recipe, tmpDir('out-'))).toThrow(/DepthwiseConv2D/);
  });

  it('names missing source tensors', () => {
    const dir = tmpDir('ckpt-');
    writeCheckpoint(dir, DCASE_WEIGHTS.filter((d) => d.name !== 'dense/bias'), DCASE_LAYERS);
    const recipe = loadRecipe(recipePath);
    expect(() => exportCheckpoint(dir, recipe, tmpDir('out-'))).toThrow(/dense\/bias/);
  });

  it('exports tensors bit-identically modulo the declared permutation', () => {
    const dir = tmpDir('ckpt-');
    const values = writeCheckpoint(dir, DCASE_WEIGHTS, DCASE_LAYERS);
    const outDir = tmpDir('out-');
    const recipe = loadRecipe(recipePath);
    const result = exportCheckpoint(dir, recipe, outDir);
    expect(result.tensorCount).toBe(recipe.tensors.length);

    const blob = decodeBlob(fs.readFileSync(result.blobPath));
    const byName = new Map(blob.map((t) => [t.name, t]));

    // conv kernel: independent index-by-index permutation check
    const src = values.get('conv2d_1/kernel')!;
    const exported = byName.get('C2.kernel')!;
    expect(exported.dims).toEqual([16, 16, 7, 7]);
    const [kh, kw, cin, cout] = [7, 7, 16, 16];
    for (let o = 0; o < cout; o += 1)
      for (let i = 0; i < cin; i += 1)
        for (let y = 0; y < kh; y += 1)
          for (let x = 0; x < kw; x += 1) {
            expect(exported.data[((o * cin + i) * kh + y) * kw + x]).toBe(
              src[((y * kw + x) * cin + i) * cout + o],
            );
          }

    // vectors pass through untouched, bit for bit
    const gamma = byName.get('BN3.gamma')!;
    expect(Buffer.from(gamma.data.buffer, gamma.data.byteOffset, 4 * gamma.data.length))
      .toEqual(Buffer.from(values.get('batch_normalization_2/gamma')!.buffer));

    // dense kernel transposed
    const fc2 = byName.get('FC2.kernel')!;
    expect(fc2.dims).toEqual([10, 100]);
    const dsrc = values.get('dense_1/kernel')!;
    for (let i = 0; i < 100; i += 1)
      for (let o = 0; o < 10; o += 1) {
        expect(fc2.data[o * 100 + i]).toBe(dsrc[i * 10 + o]);
      }
  });

  it('produces a container the primary toolkit loads, with the reference param count', () => {
    const dir = tmpDir('ckpt-');
    writeCheckpoint(dir, DCASE_WEIGHTS, DCASE_LAYERS);
    const outDir = tmpDir('out-');
    exportCheckpoint(dir, loadRecipe(recipePath), outDir);

    const costPath = path.join(outDir, 'cost.json');
    const proc = spawnSync('python3', [
      '-m', 'pfprune', 'cost', '--model', outDir, '--out', costPath,
    ], { encoding: 'utf-8' });
    expect(proc.status, proc.stderr).toBe(0);
    const cost = JSON.parse(fs.readFileSync(costPath, 'utf-8'));
    expect(cost.report.total_params).toBe(46246);
    expect(cost.report.total_macs).toBe(286637800);

    // and the full data-free ranking path runs on the exported container
    const rank = spawnSync('python3', [
      '-m', 'pfprune', 'rank', '--model', outDir, '--method', 'operator-norm',
      '--out', path.join(outDir, 'scores.json'),
    ], { encoding: 'utf-8' });
    expect(rank.status, rank.stderr).toBe(0);
  });
});
