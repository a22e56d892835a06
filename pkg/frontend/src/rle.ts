/** Run-length decoding of mask payloads.
 *
 * The wire format is alternating (skip, run) pixel counts in row-major
 * order within the detection box, always starting with a skip.
 */

export function rleDecode(counts: number[], width: number, height: number): Uint8Array {
  const total = width * height;
  const out = new Uint8Array(total);
  let pos = 0;
  let foreground = false;
  for (const n of counts) {
    if (n < 0 || !Number.isInteger(n)) {
      throw new Error(`bad run length ${n}`);
    }
    if (foreground) {
      out.fill(1, pos, pos + n);
    }
    pos += n;
    foreground = !foreground;
  }
  if (pos !== total) {
    throw new Error(`run lengths cover ${pos} px, expected ${total}`);
  }
  return out;
}

export function foregroundCount(mask: Uint8Array): number {
  let n = 0;
  for (const v of mask) n += v;
  return n;
}
