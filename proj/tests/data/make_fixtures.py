# Copyright 2026 The lpclip Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes the committed .lpce fixtures with struct/json only, as an
independent producer of the wire format. Run from this directory."""

import json
import math
import os
import struct
import zlib


def write_store(path, rows, manifest):
    n = len(rows)
    d = len(rows[0]) if rows else 0
    unit = all(abs(math.sqrt(sum(v * v for v in r)) - 1.0) <= 1e-4 for r in rows) and n > 0
    header = b"LPCE" + struct.pack("<HBBQQ", 1, 1, 1 if unit else 0, n, d)
    payload = b"".join(struct.pack("<%df" % d, *r) for r in rows)
    with open(path, "wb") as f:
        f.write(header + payload)
    base = path[: -len(".lpce")]
    with open(base + ".manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return header + payload


def unit(v):
    s = math.sqrt(sum(x * x for x in v))
    return [x / s for x in v]


def main():
    # 4x4 raw (not unit-norm) matrix with exactly representable values.
    m = [[(i * 4 + j) / 16.0 - 0.5 for j in range(4)] for i in range(4)]
    data = write_store("fixture_4x4.lpce", m,
                       {"class_names": ["a", "b"], "labels": [0, 1, -1, 1], "source": "fixture"})
    print("fixture_4x4 crc32 %08x size %d" % (zlib.crc32(data) & 0xFFFFFFFF, len(data)))

    # Exporter-style view group: 6 samples, D=4, two strong views, extra keys.
    os.makedirs("bridge_group", exist_ok=True)
    names = ["cat", "dog"]
    labels = [0, 1, 0, 1, -1, 0]
    base = [unit([1.0 + i, 0.5 - i, 0.25 * i, 1.0]) for i in range(6)]
    meta = {"class_names": names, "labels": labels, "view_group": "cifar10-test",
            "source": "exporter ViT-B/32", "encoder": "ViT-B/32", "weak_transform": True}
    write_store("bridge_group/weak.lpce", base, meta)
    for k in range(2):
        view = [unit([x + 0.1 * (k + 1) * ((i + j) % 3 - 1) for j, x in enumerate(r)])
                for i, r in enumerate(base)]
        write_store("bridge_group/strong_%d.lpce" % k, view, meta)
    with open("bridge_group/group.manifest.json", "w") as f:
        json.dump(dict(meta, views=2), f, indent=2)

    # Prompt bank: C=2 classes x P=3 prompts, class-major.
    rows = []
    for c in range(2):
        for p in range(3):
            rows.append(unit([1.0 if c == 0 else 0.1 * p, 0.1 * p if c == 0 else 1.0, 0.2, 0.05 * p]))
    write_store("bridge_prompts.lpce", rows,
                {"class_names": names, "source": "exporter prompts", "prompt_count": 3,
                 "prompt_texts": ["a photo of a {}.", "a blurry photo of a {}.", "a drawing of a {}."]})


if __name__ == "__main__":
    main()
