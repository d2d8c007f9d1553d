/** Inference: RGB image -> descriptor image, plus prediction-dataset assembly. */

import * as fs from "fs";
import * as path from "path";

import { readRgb, readSceneMeta, writeRgbPng, SceneMeta } from "./dataset";
import { writeDimg } from "./dimg";
import { loadCheckpoint } from "./model";
import { Network } from "./nn";

export function predictBuffer(model: Network, rgb: Float32Array,
                              height: number, width: number): Float32Array {
  const out = model.forward(rgb, height, width, false);
  for (const v of out) {
    if (!Number.isFinite(v)) {
      throw new Error("non-finite prediction");
    }
  }
  return out;
}

export async function predictRgb(checkpointDir: string, rgbPath: string,
                                 outPath: string): Promise<void> {
  const { model, metadata } = loadCheckpoint(checkpointDir);
  const rgb = readRgb(rgbPath);
  const data = predictBuffer(model, rgb.data, rgb.height, rgb.width);
  writeDimg(outPath, {
    height: rgb.height, width: rgb.width, dim: metadata.dim, data,
  });
}

/**
 * Predict the requested frames of a dataset and write a dataset directory
 * that the primary tooling can evaluate unmodified: scene.json re-indexed to
 * the selected frames, rgb/depth/mask copied through, descriptors replaced
 * by network output, previews rendered from the predictions.
 */
export async function predictDataset(checkpointDir: string, datasetDir: string,
                                     outDir: string,
                                     frames?: number[]): Promise<void> {
  const meta = readSceneMeta(datasetDir);
  const selected = frames ?? meta.frames.map((_, i) => i);
  const { model, metadata } = loadCheckpoint(checkpointDir);
  fs.mkdirSync(outDir, { recursive: true });

  const outMeta: SceneMeta = {
    intrinsics: meta.intrinsics,
    object_pose: meta.object_pose,
    descriptor: {
      dim: metadata.dim,
      background: metadata.background,
      view_dependent: meta.descriptor.view_dependent,
      band_px: meta.descriptor.band_px,
    },
    frames: [],
  };

  selected.forEach((src, dst) => {
    const frame = meta.frames[src];
    if (!frame) {
      throw new Error(`frame ${src} out of range`);
    }
    const names = {
      rgb: `rgb_${String(dst).padStart(5, "0")}.png`,
      depth: `depth_${String(dst).padStart(5, "0")}.png`,
      mask: `mask_${String(dst).padStart(5, "0")}.png`,
      descriptors: `desc_${String(dst).padStart(5, "0")}.dimg`,
      preview: `preview_${String(dst).padStart(5, "0")}.png`,
    };
    for (const key of ["rgb", "depth", "mask"] as const) {
      fs.copyFileSync(path.join(datasetDir, frame.files[key]),
                      path.join(outDir, names[key]));
    }
    const rgb = readRgb(path.join(datasetDir, frame.files.rgb));
    const data = predictBuffer(model, rgb.data, rgb.height, rgb.width);
    writeDimg(path.join(outDir, names.descriptors), {
      height: rgb.height, width: rgb.width, dim: metadata.dim, data,
    });
    const preview = new Uint8Array(rgb.height * rgb.width * 3);
    const dim = metadata.dim;
    for (let p = 0; p < rgb.height * rgb.width; p++) {
      for (let c = 0; c < 3; c++) {
        const v = c < dim ? data[p * dim + c] : (dim === 1 ? data[p * dim] : 0);
        preview[3 * p + c] = Math.max(0, Math.min(255, Math.round(v * 255)));
      }
    }
    writeRgbPng(path.join(outDir, names.preview), preview, rgb.width, rgb.height);
    outMeta.frames.push({ files: names, extrinsic: frame.extrinsic });
  });
  fs.writeFileSync(path.join(outDir, "scene.json"),
                   JSON.stringify(outMeta, null, 2) + "\n");
}
