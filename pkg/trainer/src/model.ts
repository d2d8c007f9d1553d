/** Checkpoint format for the hand-rolled network.
 *
 * Checkpoint directory layout:
 *   model.json    layer channel spec + weight manifest
 *   weights.bin   concatenated float32 weights, little-endian
 *   metadata.json descriptor dim, background vector, training provenance
 */

import * as fs from "fs";
import * as path from "path";

import { Network } from "./nn";

export interface CheckpointMetadata {
  dim: number;
  background: number[] | null;
  normalized: boolean;
  dataset?: string;
  epochs?: number;
  finalLoss?: number;
  holdout?: number[];
}

export const HIDDEN_CHANNELS = [16, 16, 16];

export function buildModel(dim: number, seed = 7): Network {
  return new Network([3, ...HIDDEN_CHANNELS, dim], seed);
}

export function saveCheckpoint(dir: string, model: Network,
                               metadata: CheckpointMetadata): void {
  fs.mkdirSync(dir, { recursive: true });
  const manifest: { channels: number[]; tensors: Array<{ name: string; length: number }> } = {
    channels: model.channelSpec(),
    tensors: [],
  };
  const chunks: Buffer[] = [];
  model.layers.forEach((layer, i) => {
    manifest.tensors.push({ name: `conv${i}/weight`, length: layer.weight.length });
    chunks.push(Buffer.from(layer.weight.buffer, layer.weight.byteOffset,
                            layer.weight.byteLength));
    manifest.tensors.push({ name: `conv${i}/bias`, length: layer.bias.length });
    chunks.push(Buffer.from(layer.bias.buffer, layer.bias.byteOffset,
                            layer.bias.byteLength));
  });
  fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.concat(chunks));
  fs.writeFileSync(path.join(dir, "model.json"),
                   JSON.stringify(manifest, null, 2) + "\n");
  fs.writeFileSync(path.join(dir, "metadata.json"),
                   JSON.stringify(metadata, null, 2) + "\n");
}

export function loadCheckpoint(dir: string):
    { model: Network; metadata: CheckpointMetadata } {
  const manifest = JSON.parse(fs.readFileSync(path.join(dir, "model.json"), "utf-8"));
  const raw = fs.readFileSync(path.join(dir, "weights.bin"));
  const model = new Network(manifest.channels, 0);
  let offset = 0;
  model.layers.forEach((layer, i) => {
    for (const [name, arr] of [[`conv${i}/weight`, layer.weight],
                               [`conv${i}/bias`, layer.bias]] as const) {
      const spec = manifest.tensors.find((t: { name: string }) => t.name === name);
      if (!spec || spec.length !== arr.length) {
        throw new Error(`${dir}: weight manifest mismatch for ${name}`);
      }
      for (let k = 0; k < arr.length; k++) {
        arr[k] = raw.readFloatLE(offset + 4 * k);
      }
      offset += 4 * arr.length;
    }
  });
  const metadata = JSON.parse(
    fs.readFileSync(path.join(dir, "metadata.json"), "utf-8")) as CheckpointMetadata;
  return { model, metadata };
}
