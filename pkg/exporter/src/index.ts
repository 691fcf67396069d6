export { encodeBlob, decodeBlob, MAGIC, FORMAT_VERSION, type NamedTensor } from './blob.js';
export { convHwioToOihw, denseIoToOi, applyLayout, asNamedTensor, type Layout } from './transpose.js';
export { readCheckpoint, scanUnsupportedOps, type Checkpoint, type SourceWeight } from './tfjs.js';
export { loadRecipe, validateRecipe, type ExportRecipe, type ManifestNode, type TensorRule } from './recipe.js';
export { exportCheckpoint, type ExportResult } from './export.js';
