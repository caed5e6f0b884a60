"""Regenerate the bundled natural-image corpus used by the test suite.

Crops 256x192 tiles out of public-domain / CC0 sample photographs shipped with
scikit-image and writes them as binary PPM (P6, maxval 255).
"""
import os
import sys

from skimage import data

W, H = 256, 192

# (image loader, list of (top, left) crop origins)
CROPS = [
    ("astronaut", [(20, 40), (200, 180), (300, 0), (60, 250)]),
    ("chelsea", [(0, 0), (100, 150), (80, 190)]),
    ("coffee", [(0, 0), (150, 100), (200, 340), (40, 320)]),
    ("rocket", [(0, 0), (200, 150), (230, 380), (50, 300)]),
    ("hubble_deep_field", [(100, 100), (500, 600)]),
    ("immunohistochemistry", [(0, 0), (200, 200), (300, 250)]),
]


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    idx = 0
    for name, origins in CROPS:
        img = getattr(data, name)()
        for top, left in origins:
            tile = img[top : top + H, left : left + W, :3]
            assert tile.shape == (H, W, 3), (name, top, left, tile.shape)
            path = os.path.join(out_dir, f"n{idx:02d}_{name}.ppm")
            with open(path, "wb") as f:
                f.write(f"P6\n{W} {H}\n255\n".encode())
                f.write(tile.astype("uint8").tobytes())
            idx += 1
    print(f"wrote {idx} images to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/data/corpus")
