#!/usr/bin/env node
/**
 * pfprune-export --checkpoint DIR --recipe FILE --out-dir DIR
 */

import { exportCheckpoint } from './export.js';
import { loadRecipe } from './recipe.js';

function parseArgs(argv: string[]): Map<string, string> {
  const args = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith('--') || value === undefined) {
      throw new Error(`bad argument '${flag}'`);
    }
    args.set(flag.slice(2), value);
  }
  return args;
}

function main(): number {
  try {
    const args = parseArgs(process.argv.slice(2));
    for (const required of ['checkpoint', 'recipe', 'out-dir']) {
      if (!args.has(required)) {
        throw new Error(`missing --${required}`);
      }
    }
    const recipe = loadRecipe(args.get('recipe')!);
    const result = exportCheckpoint(args.get('checkpoint')!, recipe, args.get('out-dir')!);
    console.log(`exported ${result.tensorCount} tensors -> ${result.manifestPath}`);
    return 0;
  } catch (err) {
    console.error(JSON.stringify({ error: 'export_failed', message: String((err as Error).message ?? err) }));
    return 1;
  }
}

process.exit(main());
