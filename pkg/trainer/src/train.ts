/** Training loop: Adam on the masked pixel-normalized L2 objective. */

import * as fs from "fs";
import * as path from "path";

import { loadFrame, readSceneMeta, LoadedFrame, SceneMeta } from "./dataset";
import { lossAndGradient, lossWeights } from "./loss";
import { buildModel, saveCheckpoint } from "./model";
import { Adam, makeRng } from "./nn";

export interface TrainConfig {
  datasetDir: string;
  outDir: string;
  epochs: number;
  batchSize: number;
  learningRate: number;
  seed: number;
  /** number of trailing frames excluded from training */
  holdout: number;
  backgroundRandomization: boolean;
}

export const DEFAULT_CONFIG: Omit<TrainConfig, "datasetDir" | "outDir"> = {
  epochs: 60,
  batchSize: 8,
  learningRate: 2e-3,
  seed: 0,
  holdout: 0,
  backgroundRandomization: false,
};

function shuffled(indices: number[], rng: () => number): number[] {
  const out = indices.slice();
  for (let i = out.length - 1; i > 0; i--) {
    const j = Math.floor(rng() * (i + 1));
    [out[i], out[j]] = [out[j], out[i]];
  }
  return out;
}

/** Swap the flat background color of an RGB buffer (training augmentation). */
export function swapBackgroundColor(rgb: Float32Array, mask: Uint8Array,
                                    color: [number, number, number]): Float32Array {
  const out = rgb.slice();
  for (let p = 0; p < mask.length; p++) {
    if (!mask[p]) {
      out[3 * p] = color[0];
      out[3 * p + 1] = color[1];
      out[3 * p + 2] = color[2];
    }
  }
  return out;
}

export interface TrainResult {
  epochLosses: number[];
  trainFrames: number[];
  holdoutFrames: number[];
  meta: SceneMeta;
}

export async function train(config: TrainConfig): Promise<TrainResult> {
  if (config.epochs < 1 || config.batchSize < 1) {
    throw new Error("epochs and batch size must be >= 1");
  }
  const meta = readSceneMeta(config.datasetDir);
  const total = meta.frames.length;
  if (config.holdout >= total) {
    throw new Error(`holdout ${config.holdout} leaves no training frames`);
  }
  const trainFrames: number[] = [];
  const holdoutFrames: number[] = [];
  for (let i = 0; i < total; i++) {
    (i < total - config.holdout ? trainFrames : holdoutFrames).push(i);
  }
  const frames: LoadedFrame[] = trainFrames.map(
    (i) => loadFrame(config.datasetDir, meta, i));
  const { height, width, dim } = frames[0];
  const weights = frames.map((f) => lossWeights(f.mask, height, width));

  const model = buildModel(dim, config.seed + 7);
  const optimizer = new Adam(config.learningRate);
  const rng = makeRng(config.seed);
  const epochLosses: number[] = [];

  for (let epoch = 0; epoch < config.epochs; epoch++) {
    const order = shuffled(trainFrames.map((_, k) => k), rng);
    let epochLoss = 0;
    for (let start = 0; start < order.length; start += config.batchSize) {
      const batch = order.slice(start, start + config.batchSize);
      model.zeroGrads();
      for (const k of batch) {
        let rgb = frames[k].rgb;
        if (config.backgroundRandomization) {
          rgb = swapBackgroundColor(rgb, frames[k].mask, [rng(), rng(), rng()]);
        }
        const pred = model.forward(rgb, height, width, true);
        const { loss, grad } = lossAndGradient(pred, frames[k].target,
                                               weights[k], dim);
        epochLoss += loss;
        model.backward(grad, height, width);
      }
      optimizer.step(model.parameters());
    }
    epochLosses.push(epochLoss / trainFrames.length);
  }

  fs.mkdirSync(config.outDir, { recursive: true });
  const curve = ["epoch,loss"];
  epochLosses.forEach((l, e) => curve.push(`${e},${l}`));
  fs.writeFileSync(path.join(config.outDir, "loss_curve.csv"),
                   curve.join("\n") + "\n");
  saveCheckpoint(config.outDir, model, {
    dim,
    background: meta.descriptor.background,
    normalized: true,
    dataset: path.basename(config.datasetDir),
    epochs: config.epochs,
    finalLoss: epochLosses[epochLosses.length - 1],
    holdout: holdoutFrames,
  });
  return { epochLosses, trainFrames, holdoutFrames, meta };
}
