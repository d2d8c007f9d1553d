#!/usr/bin/env python3
"""Generate trainer test fixtures from the descriptor toolkit.

Produces, under trainer/test/fixtures/:
  loss_cases.json   100 random (pred, target, mask) cases with the toolkit's
                    masked-L2 loss values, for the cross-implementation parity
                    check
  smoke4/           4-frame 48x36 dataset for smoke tests
  train50/          50-frame 64x48 normal-colors dataset for the learning test

Datasets are produced through the descforge CLI so the fixtures exercise the
exact published formats. Rerun after changing either side:
  python3 tools/make_fixtures.py
"""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "test" / "fixtures"


def cli(*args):
    cmd = [sys.executable, "-m", "descforge.cli", *map(str, args)]
    subprocess.run(cmd, check=True, capture_output=True)


def make_loss_cases():
    from descforge.camera import CameraIntrinsics, RigidTransform
    from descforge.losses import supervised_l2_loss
    from descforge.render import DescriptorImage

    rng = np.random.default_rng(2024)
    cases = []
    for k in range(100):
        h = int(rng.integers(3, 9))
        w = int(rng.integers(3, 9))
        d = int(rng.integers(1, 5))
        if k == 0:
            mask = np.ones((h, w), dtype=bool)       # all object
        elif k == 1:
            mask = np.zeros((h, w), dtype=bool)      # all background
        else:
            mask = rng.uniform(size=(h, w)) < rng.uniform(0.1, 0.9)
        pred = rng.uniform(size=(h, w, d))
        target = rng.uniform(size=(h, w, d)).astype(np.float32)
        image = DescriptorImage(
            descriptors=target,
            mask=mask,
            depth=np.where(mask, 100, 0).astype(np.uint16),
            intrinsics=CameraIntrinsics(float(w), float(w), w / 2.0, h / 2.0, w, h),
            extrinsic=RigidTransform.identity(),
            object_pose=RigidTransform.identity(),
        )
        out = supervised_l2_loss(pred, image)
        cases.append({
            "height": h, "width": w, "dim": d,
            "pred": pred.ravel().tolist(),
            "target": target.astype(np.float64).ravel().tolist(),
            "mask": mask.astype(int).ravel().tolist(),
            "object_loss": out.object_loss,
            "background_loss": out.background_loss,
            "total": out.total,
        })
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with open(FIXTURES / "loss_cases.json", "w") as fh:
        json.dump(cases, fh)
    print(f"wrote {FIXTURES / 'loss_cases.json'} ({len(cases)} cases)")


def make_datasets():
    work = FIXTURES / "_work"
    work.mkdir(parents=True, exist_ok=True)
    mesh = work / "sphere.ply"
    cli("gen-mesh", "uv-sphere", "--radius", 0.09, "--n", 48, "--m", 36,
        "--out", mesh)
    emb = work / "emb"
    cli("embed", "--mesh", mesh, "--dim", 3, "--symmetry", "off",
        "--mass", "barycentric", "--out", emb)
    cli("render", "--mesh", mesh, "--field", emb / "field.dfld",
        "--out", FIXTURES / "smoke4", "--frames", 4, "--seed", 5,
        "--width", 48, "--height", 36, "--fx", 44, "--fy", 44,
        "--cx", 24, "--cy", 18, "--radius-min", 0.36, "--radius-max", 0.44,
        "--shading", "normal-colors")
    cli("render", "--mesh", mesh, "--field", emb / "field.dfld",
        "--out", FIXTURES / "train50", "--frames", 50, "--seed", 31,
        "--width", 64, "--height", 48, "--fx", 58, "--fy", 58,
        "--cx", 32, "--cy", 24, "--radius-min", 0.36, "--radius-max", 0.44,
        "--elev-min", 20, "--elev-max", 60, "--shading", "normal-colors")
    print(f"wrote {FIXTURES / 'smoke4'} and {FIXTURES / 'train50'}")


if __name__ == "__main__":
    make_loss_cases()
    make_datasets()
    import shutil
    shutil.rmtree(FIXTURES / "_work")
