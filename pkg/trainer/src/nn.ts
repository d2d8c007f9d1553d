/** Minimal dense-prediction network: 3x3 same-padding conv layers trained
 * with Adam. Everything runs on flat Float32Arrays in NHWC layout; the GEMM
 * inner loops are written for JIT-friendly streaming access.
 */

export function makeRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Standard-normal sampler (Box-Muller) over a deterministic PRNG. */
function makeNormal(rng: () => number): () => number {
  let spare: number | null = null;
  return () => {
    if (spare !== null) {
      const v = spare;
      spare = null;
      return v;
    }
    let u = 0;
    let v = 0;
    while (u === 0) {
      u = rng();
    }
    v = rng();
    const r = Math.sqrt(-2 * Math.log(u));
    spare = r * Math.sin(2 * Math.PI * v);
    return r * Math.cos(2 * Math.PI * v);
  };
}

/** C(M,N) += A(M,K) x B(K,N), all row-major. */
function gemmAcc(m: number, k: number, n: number,
                 a: Float32Array, b: Float32Array, c: Float32Array): void {
  for (let i = 0; i < m; i++) {
    const aOff = i * k;
    const cOff = i * n;
    for (let p = 0; p < k; p++) {
      const av = a[aOff + p];
      if (av === 0) {
        continue;
      }
      const bOff = p * n;
      for (let j = 0; j < n; j++) {
        c[cOff + j] += av * b[bOff + j];
      }
    }
  }
}

export interface ConvSpec {
  inChannels: number;
  outChannels: number;
  relu: boolean;
}

export class ConvLayer {
  readonly spec: ConvSpec;
  /** (9 * inChannels, outChannels) row-major */
  weight: Float32Array;
  bias: Float32Array;
  gradWeight: Float32Array;
  gradBias: Float32Array;
  private patches: Float32Array | null = null;
  private output: Float32Array | null = null;
  private pixels = 0;

  constructor(spec: ConvSpec, normal: () => number) {
    this.spec = spec;
    const kIn = 9 * spec.inChannels;
    const std = Math.sqrt(2 / kIn);
    this.weight = new Float32Array(kIn * spec.outChannels);
    for (let i = 0; i < this.weight.length; i++) {
      this.weight[i] = std * normal();
    }
    this.bias = new Float32Array(spec.outChannels);
    this.gradWeight = new Float32Array(this.weight.length);
    this.gradBias = new Float32Array(spec.outChannels);
  }

  /** im2col with zero padding; patch index = (3*(ky+1) + (kx+1)) * Cin + c. */
  private buildPatches(x: Float32Array, height: number, width: number): Float32Array {
    const cin = this.spec.inChannels;
    const kIn = 9 * cin;
    const out = new Float32Array(height * width * kIn);
    for (let y = 0; y < height; y++) {
      for (let ky = -1; ky <= 1; ky++) {
        const sy = y + ky;
        if (sy < 0 || sy >= height) {
          continue;
        }
        for (let kx = -1; kx <= 1; kx++) {
          const slot = (3 * (ky + 1) + (kx + 1)) * cin;
          const rowOut = y * width;
          const rowIn = sy * width;
          const x0 = Math.max(0, -kx);
          const x1 = Math.min(width, width - kx);
          for (let xx = x0; xx < x1; xx++) {
            const src = (rowIn + xx + kx) * cin;
            const dst = (rowOut + xx) * kIn + slot;
            for (let c = 0; c < cin; c++) {
              out[dst + c] = x[src + c];
            }
          }
        }
      }
    }
    return out;
  }

  forward(x: Float32Array, height: number, width: number,
          training: boolean): Float32Array {
    const { outChannels } = this.spec;
    const kIn = 9 * this.spec.inChannels;
    const pixels = height * width;
    const patches = this.buildPatches(x, height, width);
    const y = new Float32Array(pixels * outChannels);
    for (let p = 0; p < pixels; p++) {
      y.set(this.bias, p * outChannels);
    }
    gemmAcc(pixels, kIn, outChannels, patches, this.weight, y);
    if (this.spec.relu) {
      for (let i = 0; i < y.length; i++) {
        if (y[i] < 0) {
          y[i] = 0;
        }
      }
    }
    if (training) {
      this.patches = patches;
      this.output = y;
      this.pixels = pixels;
    }
    return y;
  }

  /** Accumulates weight/bias grads; returns the input gradient. */
  backward(dY: Float32Array, height: number, width: number): Float32Array {
    if (this.patches === null || this.output === null) {
      throw new Error("backward called before a training forward pass");
    }
    const { inChannels, outChannels } = this.spec;
    const kIn = 9 * inChannels;
    const pixels = this.pixels;
    if (this.spec.relu) {
      for (let i = 0; i < dY.length; i++) {
        if (this.output[i] <= 0) {
          dY[i] = 0;
        }
      }
    }
    for (let p = 0; p < pixels; p++) {
      const off = p * outChannels;
      for (let n = 0; n < outChannels; n++) {
        this.gradBias[n] += dY[off + n];
      }
    }
    // dW(K, N) += patches^T(K, M) x dY(M, N)
    for (let p = 0; p < pixels; p++) {
      const pOff = p * kIn;
      const dOff = p * outChannels;
      for (let k = 0; k < kIn; k++) {
        const pv = this.patches[pOff + k];
        if (pv === 0) {
          continue;
        }
        const wOff = k * outChannels;
        for (let n = 0; n < outChannels; n++) {
          this.gradWeight[wOff + n] += pv * dY[dOff + n];
        }
      }
    }
    // dPatches(M, K) = dY(M, N) x W^T(N, K), then scatter back (col2im)
    const wT = new Float32Array(outChannels * kIn);
    for (let k = 0; k < kIn; k++) {
      for (let n = 0; n < outChannels; n++) {
        wT[n * kIn + k] = this.weight[k * outChannels + n];
      }
    }
    const dPatches = new Float32Array(pixels * kIn);
    gemmAcc(pixels, outChannels, kIn, dY, wT, dPatches);
    const dX = new Float32Array(pixels * inChannels);
    for (let y = 0; y < height; y++) {
      for (let ky = -1; ky <= 1; ky++) {
        const sy = y + ky;
        if (sy < 0 || sy >= height) {
          continue;
        }
        for (let kx = -1; kx <= 1; kx++) {
          const slot = (3 * (ky + 1) + (kx + 1)) * inChannels;
          const rowOut = y * width;
          const rowIn = sy * width;
          const x0 = Math.max(0, -kx);
          const x1 = Math.min(width, width - kx);
          for (let xx = x0; xx < x1; xx++) {
            const dst = (rowIn + xx + kx) * inChannels;
            const src = (rowOut + xx) * kIn + slot;
            for (let c = 0; c < inChannels; c++) {
              dX[dst + c] += dPatches[src + c];
            }
          }
        }
      }
    }
    this.patches = null;
    this.output = null;
    return dX;
  }

  zeroGrads(): void {
    this.gradWeight.fill(0);
    this.gradBias.fill(0);
  }
}

export class Network {
  readonly layers: ConvLayer[];

  constructor(channels: number[], seed: number) {
    // channels = [in, hidden..., out]; every layer but the last uses ReLU
    const normal = makeNormal(makeRng(seed));
    this.layers = [];
    for (let i = 0; i + 1 < channels.length; i++) {
      this.layers.push(new ConvLayer({
        inChannels: channels[i],
        outChannels: channels[i + 1],
        relu: i + 2 < channels.length,
      }, normal));
    }
  }

  forward(x: Float32Array, height: number, width: number,
          training = false): Float32Array {
    let cur = x;
    for (const layer of this.layers) {
      cur = layer.forward(cur, height, width, training);
    }
    return cur;
  }

  backward(dOut: Float32Array, height: number, width: number): void {
    let cur = dOut;
    for (let i = this.layers.length - 1; i >= 0; i--) {
      cur = this.layers[i].backward(cur, height, width);
    }
  }

  zeroGrads(): void {
    this.layers.forEach((l) => l.zeroGrads());
  }

  parameters(): Array<{ value: Float32Array; grad: Float32Array }> {
    const out: Array<{ value: Float32Array; grad: Float32Array }> = [];
    for (const layer of this.layers) {
      out.push({ value: layer.weight, grad: layer.gradWeight });
      out.push({ value: layer.bias, grad: layer.gradBias });
    }
    return out;
  }

  channelSpec(): number[] {
    const spec = [this.layers[0].spec.inChannels];
    for (const layer of this.layers) {
      spec.push(layer.spec.outChannels);
    }
    return spec;
  }
}

export class Adam {
  private m: Float32Array[] = [];
  private v: Float32Array[] = [];
  private t = 0;

  constructor(private lr: number, private beta1 = 0.9, private beta2 = 0.999,
              private eps = 1e-8) {}

  step(params: Array<{ value: Float32Array; grad: Float32Array }>): void {
    if (this.m.length === 0) {
      this.m = params.map((p) => new Float32Array(p.value.length));
      this.v = params.map((p) => new Float32Array(p.value.length));
    }
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    params.forEach((p, idx) => {
      const m = this.m[idx];
      const v = this.v[idx];
      for (let i = 0; i < p.value.length; i++) {
        const g = p.grad[i];
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g;
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g * g;
        p.value[i] -= this.lr * (m[i] / c1) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    });
  }
}
