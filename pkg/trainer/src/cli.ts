/** Command line: train a descriptor regressor, run inference.
 *
 *   train            --dataset DIR --out DIR [--epochs N] [--batch N]
 *                    [--lr F] [--seed N] [--holdout N] [--background-randomization]
 *   predict          --checkpoint DIR --rgb FILE --out FILE.dimg
 *   predict-dataset  --checkpoint DIR --dataset DIR --out DIR [--frames A-B]
 */

import { predictDataset, predictRgb } from "./predict";
import { DEFAULT_CONFIG, train } from "./train";

function parseFlags(argv: string[]): Map<string, string | boolean> {
  const flags = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) {
      throw new Error(`unexpected argument ${arg}`);
    }
    const key = arg.slice(2);
    if (i + 1 < argv.length && !argv[i + 1].startsWith("--")) {
      flags.set(key, argv[i + 1]);
      i++;
    } else {
      flags.set(key, true);
    }
  }
  return flags;
}

function needString(flags: Map<string, string | boolean>, key: string): string {
  const value = flags.get(key);
  if (typeof value !== "string") {
    throw new Error(`--${key} is required`);
  }
  return value;
}

function numberOr(flags: Map<string, string | boolean>, key: string,
                  fallback: number): number {
  const value = flags.get(key);
  if (value === undefined) {
    return fallback;
  }
  const parsed = Number(value);
  if (!Number.isFinite(parsed)) {
    throw new Error(`--${key} must be a number`);
  }
  return parsed;
}

function parseFrameRange(text: string | undefined): number[] | undefined {
  if (text === undefined) {
    return undefined;
  }
  const out: number[] = [];
  for (const part of text.split(",")) {
    const m = part.match(/^(\d+)-(\d+)$/);
    if (m) {
      for (let i = Number(m[1]); i <= Number(m[2]); i++) {
        out.push(i);
      }
    } else if (/^\d+$/.test(part)) {
      out.push(Number(part));
    } else {
      throw new Error(`bad frame range ${text}`);
    }
  }
  return out;
}

export async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    const flags = parseFlags(rest);
    if (command === "train") {
      const result = await train({
        datasetDir: needString(flags, "dataset"),
        outDir: needString(flags, "out"),
        epochs: numberOr(flags, "epochs", DEFAULT_CONFIG.epochs),
        batchSize: numberOr(flags, "batch", DEFAULT_CONFIG.batchSize),
        learningRate: numberOr(flags, "lr", DEFAULT_CONFIG.learningRate),
        seed: numberOr(flags, "seed", DEFAULT_CONFIG.seed),
        holdout: numberOr(flags, "holdout", DEFAULT_CONFIG.holdout),
        backgroundRandomization: flags.get("background-randomization") === true,
      });
      const losses = result.epochLosses;
      console.log(JSON.stringify({
        epochs: losses.length,
        initialLoss: losses[0],
        finalLoss: losses[losses.length - 1],
        holdoutFrames: result.holdoutFrames,
      }));
      return 0;
    }
    if (command === "predict") {
      await predictRgb(needString(flags, "checkpoint"), needString(flags, "rgb"),
                       needString(flags, "out"));
      console.log(JSON.stringify({ out: needString(flags, "out") }));
      return 0;
    }
    if (command === "predict-dataset") {
      const frames = parseFrameRange(flags.get("frames") as string | undefined);
      await predictDataset(needString(flags, "checkpoint"),
                           needString(flags, "dataset"),
                           needString(flags, "out"), frames);
      console.log(JSON.stringify({ out: needString(flags, "out"),
                                   frames: frames ?? "all" }));
      return 0;
    }
    console.error(JSON.stringify({ error: "usage",
                                   message: "commands: train, predict, predict-dataset" }));
    return 2;
  } catch (err) {
    console.error(JSON.stringify({ error: "TrainerError",
                                   message: (err as Error).message }));
    return 1;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
