/** Binary descriptor-image codec (magic "DDIF", version 1, little-endian). */

import * as fs from "fs";

export interface DescriptorImage {
  height: number;
  width: number;
  dim: number;
  /** channel-last row-major float32, length = height * width * dim */
  data: Float32Array;
}

const MAGIC = "DDIF";
const VERSION = 1;

export function readDimg(path: string): DescriptorImage {
  const buf = fs.readFileSync(path);
  if (buf.length < 20 || buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: not a .dimg file`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported .dimg version ${version}`);
  }
  const height = buf.readUInt32LE(8);
  const width = buf.readUInt32LE(12);
  const dim = buf.readUInt32LE(16);
  const count = height * width * dim;
  if (buf.length < 20 + 4 * count) {
    throw new Error(`${path}: truncated .dimg payload`);
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(20 + 4 * i);
  }
  return { height, width, dim, data };
}

export function writeDimg(path: string, img: DescriptorImage): void {
  const count = img.height * img.width * img.dim;
  if (img.data.length !== count) {
    throw new Error("descriptor buffer length does not match dimensions");
  }
  const buf = Buffer.alloc(20 + 4 * count);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt32LE(img.height, 8);
  buf.writeUInt32LE(img.width, 12);
  buf.writeUInt32LE(img.dim, 16);
  for (let i = 0; i < count; i++) {
    buf.writeFloatLE(img.data[i], 20 + 4 * i);
  }
  fs.writeFileSync(path, buf);
}
