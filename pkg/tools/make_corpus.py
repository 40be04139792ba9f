"""Regenerate the bundled 512x512 test images.

Seven come from scikit-image's sample data (public domain / CC0); three are
drawn procedurally with a fixed seed.
"""
from pathlib import Path

import cv2
import numpy as np
import skimage.data as sk
from PIL import Image

OUT = Path(__file__).resolve().parents[1] / "src" / "aesthqr" / "data" / "corpus"
SIZE = 512


def square(img):
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    img = img[..., :3]
    h, w = img.shape[:2]
    s = min(h, w)
    img = img[(h - s) // 2:(h - s) // 2 + s, (w - s) // 2:(w - s) // 2 + s]
    interp = cv2.INTER_AREA if s > SIZE else cv2.INTER_CUBIC
    return cv2.resize(np.ascontiguousarray(img), (SIZE, SIZE), interpolation=interp)


def synth_gradient():
    y, x = np.mgrid[0:SIZE, 0:SIZE] / SIZE
    r = np.hypot(x - 0.5, y - 0.5)
    rgb = np.stack([0.5 + 0.5 * np.cos(6 * r), x, 1 - y], axis=2)
    return (rgb * 255).astype(np.uint8)


def synth_shapes(rng):
    img = np.full((SIZE, SIZE, 3), 235, np.uint8)
    for _ in range(14):
        color = tuple(int(c) for c in rng.integers(0, 256, 3))
        cx, cy = (int(v) for v in rng.integers(40, SIZE - 40, 2))
        if rng.random() < 0.5:
            cv2.circle(img, (cx, cy), int(rng.integers(20, 90)), color, -1)
        else:
            w, h = (int(v) for v in rng.integers(30, 160, 2))
            cv2.rectangle(img, (cx - w // 2, cy - h // 2), (cx + w // 2, cy + h // 2), color, -1)
    return img


def synth_clouds(rng):
    acc = np.zeros((SIZE, SIZE, 3))
    for octave in range(1, 7):
        n = 2 ** octave
        noise = rng.random((n, n, 3)).astype(np.float32)
        acc += cv2.resize(noise, (SIZE, SIZE), interpolation=cv2.INTER_CUBIC) / octave
    acc = (acc - acc.min()) / (acc.max() - acc.min())
    return (acc * 255).astype(np.uint8)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240101)
    images = {
        "astronaut": sk.astronaut(), "camera": sk.camera(), "coffee": sk.coffee(),
        "chelsea": sk.chelsea(), "rocket": sk.rocket(),
        "hubble_deep_field": sk.hubble_deep_field(), "retina": sk.retina(),
        "synth_gradient": synth_gradient(), "synth_shapes": synth_shapes(rng),
        "synth_clouds": synth_clouds(rng),
    }
    for name, img in images.items():
        Image.fromarray(square(img)).save(OUT / f"{name}.png", optimize=True)


if __name__ == "__main__":
    main()
