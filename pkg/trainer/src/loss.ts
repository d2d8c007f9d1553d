/** Masked L2 loss with per-region pixel-count normalization.
 *
 * For one image: the sum over object pixels of the squared descriptor error
 * divided by the object pixel count, plus the same over the background.
 * Empty regions contribute zero.
 */

export interface LossBreakdown {
  object: number;
  background: number;
  total: number;
}

export function maskedL2Loss(pred: Float32Array, target: Float32Array,
                             mask: Uint8Array, height: number, width: number,
                             dim: number): LossBreakdown {
  let objSum = 0;
  let backSum = 0;
  let objCount = 0;
  for (let p = 0; p < height * width; p++) {
    let d2 = 0;
    for (let c = 0; c < dim; c++) {
      const d = pred[p * dim + c] - target[p * dim + c];
      d2 += d * d;
    }
    if (mask[p]) {
      objSum += d2;
      objCount += 1;
    } else {
      backSum += d2;
    }
  }
  const backCount = height * width - objCount;
  const object = objCount > 0 ? objSum / objCount : 0;
  const background = backCount > 0 ? backSum / backCount : 0;
  return { object, background, total: object + background };
}

/** Per-pixel weights realizing the normalization: mask/P_obj + (1-mask)/P_back. */
export function lossWeights(mask: Uint8Array, height: number, width: number): Float32Array {
  let objectCount = 0;
  for (let i = 0; i < mask.length; i++) {
    objectCount += mask[i];
  }
  const backgroundCount = height * width - objectCount;
  const wObj = objectCount > 0 ? 1 / objectCount : 0;
  const wBack = backgroundCount > 0 ? 1 / backgroundCount : 0;
  const out = new Float32Array(height * width);
  for (let i = 0; i < mask.length; i++) {
    out[i] = mask[i] ? wObj : wBack;
  }
  return out;
}

/** Loss value and its gradient wrt the prediction: dL/dpred = 2 w (pred - target). */
export function lossAndGradient(pred: Float32Array, target: Float32Array,
                                weights: Float32Array, dim: number):
    { loss: number; grad: Float32Array } {
  const grad = new Float32Array(pred.length);
  let loss = 0;
  for (let p = 0; p < weights.length; p++) {
    const w = weights[p];
    if (w === 0) {
      continue;
    }
    for (let c = 0; c < dim; c++) {
      const d = pred[p * dim + c] - target[p * dim + c];
      loss += w * d * d;
      grad[p * dim + c] = 2 * w * d;
    }
  }
  return { loss, grad };
}
