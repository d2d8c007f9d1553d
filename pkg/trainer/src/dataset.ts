/** Reader for rendered scene datasets (scene.json + per-frame files). */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

import { DescriptorImage, readDimg } from "./dimg";

export interface FrameFiles {
  rgb: string;
  depth: string;
  mask: string;
  descriptors: string;
  preview?: string;
}

export interface SceneFrame {
  files: FrameFiles;
  extrinsic: number[][];
}

export interface SceneMeta {
  intrinsics: {
    fx: number; fy: number; cx: number; cy: number;
    width: number; height: number;
  };
  object_pose: number[][];
  descriptor: {
    dim: number;
    background: number[] | null;
    view_dependent?: string;
    band_px?: number;
  };
  frames: SceneFrame[];
}

export interface LoadedFrame {
  /** h*w*3 float32 in [0, 1], channel-last */
  rgb: Float32Array;
  /** h*w*dim float32 target descriptors */
  target: Float32Array;
  /** h*w uint8, 1 = object */
  mask: Uint8Array;
  height: number;
  width: number;
  dim: number;
}

export function readSceneMeta(root: string): SceneMeta {
  const metaPath = path.join(root, "scene.json");
  if (!fs.existsSync(metaPath)) {
    throw new Error(`${root}: missing scene.json`);
  }
  const meta = JSON.parse(fs.readFileSync(metaPath, "utf-8")) as SceneMeta;
  for (const key of ["intrinsics", "object_pose", "descriptor", "frames"]) {
    if (!(key in meta)) {
      throw new Error(`${metaPath}: missing "${key}"`);
    }
  }
  return meta;
}

export function readRgb(file: string): { data: Float32Array; width: number; height: number } {
  const png = PNG.sync.read(fs.readFileSync(file));
  const out = new Float32Array(png.width * png.height * 3);
  for (let i = 0; i < png.width * png.height; i++) {
    out[3 * i] = png.data[4 * i] / 255;
    out[3 * i + 1] = png.data[4 * i + 1] / 255;
    out[3 * i + 2] = png.data[4 * i + 2] / 255;
  }
  return { data: out, width: png.width, height: png.height };
}

export function readMask(file: string): { data: Uint8Array; width: number; height: number } {
  const png = PNG.sync.read(fs.readFileSync(file));
  const out = new Uint8Array(png.width * png.height);
  for (let i = 0; i < png.width * png.height; i++) {
    out[i] = png.data[4 * i] > 127 ? 1 : 0;
  }
  return { data: out, width: png.width, height: png.height };
}

export function writeRgbPng(file: string, rgb: Uint8Array, width: number, height: number): void {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[4 * i] = rgb[3 * i];
    png.data[4 * i + 1] = rgb[3 * i + 1];
    png.data[4 * i + 2] = rgb[3 * i + 2];
    png.data[4 * i + 3] = 255;
  }
  fs.writeFileSync(file, PNG.sync.write(png));
}

export function loadFrame(root: string, meta: SceneMeta, index: number): LoadedFrame {
  const frame = meta.frames[index];
  if (!frame) {
    throw new Error(`frame ${index} out of range (${meta.frames.length} frames)`);
  }
  const rgb = readRgb(path.join(root, frame.files.rgb));
  const desc: DescriptorImage = readDimg(path.join(root, frame.files.descriptors));
  const mask = readMask(path.join(root, frame.files.mask));
  if (desc.width !== rgb.width || desc.height !== rgb.height
      || mask.width !== rgb.width || mask.height !== rgb.height) {
    throw new Error(`frame ${index}: inconsistent channel shapes`);
  }
  if (desc.dim !== meta.descriptor.dim) {
    throw new Error(`frame ${index}: descriptor dim ${desc.dim} != ${meta.descriptor.dim}`);
  }
  return {
    rgb: rgb.data,
    target: desc.data,
    mask: mask.data,
    height: rgb.height,
    width: rgb.width,
    dim: desc.dim,
  };
}
