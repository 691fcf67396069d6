/**
 * PFPW weight blob encoding.
 *
 * Layout (little-endian): magic "PFPW" | version u32 | tensor_count u32,
 * then per tensor: name_len u32 | utf-8 name | dtype u8 (0 = float32) |
 * rank u8 | dims u32 each | float32 payload, row-major.  Tensors are
 * written sorted by name so identical weight sets produce identical bytes;
 * trailing bytes are rejected on decode.
 */

export const MAGIC = 'PFPW';
export const FORMAT_VERSION = 1;

export interface NamedTensor {
  name: string;
  dims: number[];
  data: Float32Array;
}

function elementCount(dims: number[]): number {
  return dims.reduce((a, b) => a * b, 1);
}

export function encodeBlob(tensors: NamedTensor[]): Buffer {
  const sorted = [...tensors].sort((a, b) => (a.name < b.name ? -1 : a.name > b.name ? 1 : 0));
  const parts: Buffer[] = [];
  const header = Buffer.alloc(12);
  header.write(MAGIC, 0, 'ascii');
  header.writeUInt32LE(FORMAT_VERSION, 4);
  header.writeUInt32LE(sorted.length, 8);
  parts.push(header);

  for (const t of sorted) {
    if (t.data.length !== elementCount(t.dims)) {
      throw new Error(
        `tensor '${t.name}': payload has ${t.data.length} values, dims ${JSON.stringify(t.dims)} need ${elementCount(t.dims)}`,
      );
    }
    for (const v of t.data) {
      if (!Number.isFinite(v)) {
        throw new Error(`tensor '${t.name}' contains non-finite values`);
      }
    }
    const name = Buffer.from(t.name, 'utf-8');
    const meta = Buffer.alloc(4 + name.length + 2 + 4 * t.dims.length);
    let off = 0;
    meta.writeUInt32LE(name.length, off); off += 4;
    name.copy(meta, off); off += name.length;
    meta.writeUInt8(0, off); off += 1; // dtype float32
    meta.writeUInt8(t.dims.length, off); off += 1;
    for (const d of t.dims) {
      meta.writeUInt32LE(d, off); off += 4;
    }
    const payload = Buffer.alloc(4 * t.data.length);
    for (let i = 0; i < t.data.length; i += 1) {
      payload.writeFloatLE(t.data[i], 4 * i);
    }
    parts.push(meta, payload);
  }
  return Buffer.concat(parts);
}

export function decodeBlob(buf: Buffer): NamedTensor[] {
  let pos = 0;
  const take = (n: number, what: string): Buffer => {
    if (pos + n > buf.length) {
      throw new Error(`blob truncated while reading ${what}`);
    }
    const chunk = buf.subarray(pos, pos + n);
    pos += n;
    return chunk;
  };

  if (take(4, 'magic').toString('ascii') !== MAGIC) {
    throw new Error('bad magic, not a PFPW blob');
  }
  const version = take(4, 'version').readUInt32LE(0);
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported blob version ${version}`);
  }
  const count = take(4, 'tensor count').readUInt32LE(0);
  const tensors: NamedTensor[] = [];
  for (let i = 0; i < count; i += 1) {
    const nameLen = take(4, 'name length').readUInt32LE(0);
    const name = take(nameLen, 'name').toString('utf-8');
    const dtype = take(1, `dtype of '${name}'`).readUInt8(0);
    if (dtype !== 0) {
      throw new Error(`tensor '${name}': unknown dtype code ${dtype}`);
    }
    const rank = take(1, `rank of '${name}'`).readUInt8(0);
    const dims: number[] = [];
    for (let d = 0; d < rank; d += 1) {
      dims.push(take(4, `dims of '${name}'`).readUInt32LE(0));
    }
    const n = elementCount(dims);
    const payload = take(4 * n, `payload of '${name}'`);
    const data = new Float32Array(n);
    for (let v = 0; v < n; v += 1) {
      data[v] = payload.readFloatLE(4 * v);
    }
    tensors.push({ name, dims, data });
  }
  if (pos !== buf.length) {
    throw new Error(`${buf.length - pos} trailing bytes after last tensor`);
  }
  return tensors;
}
