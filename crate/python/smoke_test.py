#!/usr/bin/env python3
"""Smoke test for the pyblurgen extension module.

Build the module first, then run this script:

    cargo build --release -p pyblurgen
    python3 python/smoke_test.py
"""

import math
import os
import random
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_pyblurgen():
    """Copy the built cdylib next to a temp dir as an importable module."""
    candidates = [
        os.path.join(REPO, "target", profile, name)
        for profile in ("release", "debug")
        for name in ("libpyblurgen.so", "pyblurgen.so", "libpyblurgen.dylib")
    ]
    built = next((p for p in candidates if os.path.exists(p)), None)
    if built is None:
        sys.exit("build the module first: cargo build --release -p pyblurgen")
    stage = tempfile.mkdtemp(prefix="pyblurgen_")
    shutil.copy(built, os.path.join(stage, "pyblurgen.so"))
    sys.path.insert(0, stage)
    import pyblurgen

    return pyblurgen


def textured_image(bg, w, h, seed):
    rng = random.Random(seed)
    data = []
    for y in range(h):
        for x in range(w):
            base = 0.25 + 0.5 * x / (w - 1)
            for _ in range(3):
                data.append(min(1.0, max(0.0, base + rng.uniform(-0.2, 0.2))))
    return bg.Image(w, h, 3, data)


def main():
    bg = import_pyblurgen()
    print(f"module loaded, config schema v{bg.CONFIG_SCHEMA_VERSION}")

    # Metrics against hand values.
    assert bg.roc_auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == 0.75
    assert bg.average_precision([0.9, 0.2], [False, True]) == 0.5
    probs = bg.proposal_distribution([0.0, 0.0])
    assert probs == [0.5, 0.5]
    print("metrics ok")

    # Kernels.
    g = bg.BlurKernel.gaussian(1.5)
    assert g.size == 11
    assert abs(sum(g.data()) - 1.0) < 1e-9
    m = bg.BlurKernel.motion(9, 30.0, elastic_seed=7, elastic_amplitude=1.5,
                             elastic_smoothness=2.25)
    assert m.size == 9
    assert abs(sum(m.data()) - 1.0) < 1e-9
    print("kernels ok")

    # Synthesis: the sharp half must survive bit-exactly, the blurred half
    # must score blurrier under the built-in map.
    w = h = 96
    img = textured_image(bg, w, h, seed=1)
    mask = bg.BinaryMask(w, h, [x < w // 2 for _ in range(h) for x in range(w)])
    synth = bg.synthesize_halo_free(img, mask, bg.BlurKernel.gaussian(2.5), 5)
    orig, out, mk = img.data(), synth.data(), mask.data()
    for i in range(w * h):
        if not mk[i]:
            assert out[3 * i:3 * i + 3] == orig[3 * i:3 * i + 3]
    blur_map = bg.sharpness_map(synth)
    auc, ap = bg.evaluate_image(blur_map, mask)
    assert 0.5 < auc <= 1.0, f"auc {auc}"
    print(f"synthesis ok (baseline auc {auc:.3f}, ap {ap:.3f})")

    # Mask IO round trip and connected components.
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "mask.png")
        mask.save(path)
        back = bg.BinaryMask.load(path)
        assert back.data() == mask.data()
    comps = bg.connected_components(mask, connectivity=8)
    assert len(comps) == 1 and comps[0][1] == mask.count_true()
    print("mask io ok")

    # Config-driven generation over a tiny on-disk fixture tree.
    with tempfile.TemporaryDirectory() as tmp:
        src = os.path.join(tmp, "src")
        props = os.path.join(tmp, "proposals")
        os.makedirs(src)
        for i in range(2):
            textured_image(bg, 96, 96, seed=10 + i).save(
                os.path.join(src, f"img_{i:02}.png"))
            sub = os.path.join(props, f"img_{i:02}")
            os.makedirs(sub)
            blob = bg.BinaryMask(
                96, 96,
                [math.hypot(x - 48, y - 48) < 25
                 for y in range(96) for x in range(96)])
            blob.save(os.path.join(sub, "proposal_0000.png"))
            blob.complement().save(os.path.join(sub, "proposal_0001.png"))
            with open(os.path.join(sub, "scores.txt"), "w") as f:
                f.write("1.0\n0.2\n")

        config = "\n".join([
            f'source_dir = "{src}"',
            'mask_mode = "proposals"',
            f'proposal_dir = "{props}"',
            f'output_dir = "{os.path.join(tmp, "out")}"',
            "master_seed = 99",
            "samples_per_image = 2",
            "output_size = 64",
        ])
        image, gt, record = bg.generate_sample(config, 0, 0)
        assert image.width == 64 and gt.width == 64
        image2, _, record2 = bg.generate_sample(config, 0, 0)
        assert image.data() == image2.data() and record == record2
        print(f"generate_sample ok: {record}")

        cfg_path = os.path.join(tmp, "cfg.toml")
        with open(cfg_path, "w") as f:
            f.write(config + "\n")
        manifest_path, n_records, n_skipped = bg.generate_dataset(cfg_path)
        assert n_records == 4 and n_skipped == 0, (n_records, n_skipped)
        assert os.path.exists(manifest_path)
        print(f"generate_dataset ok: {n_records} records at {manifest_path}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
