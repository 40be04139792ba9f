"""Bundled 512x512 test images (see ``corpus/PROVENANCE.md``)."""
from __future__ import annotations

from importlib import resources

import numpy as np
from PIL import Image


def corpus_names() -> list[str]:
    root = resources.files(__name__) / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".png"))


def load_image(name: str) -> np.ndarray:
    path = resources.files(__name__) / "corpus" / f"{name}.png"
    with resources.as_file(path) as p, Image.open(p) as im:
        return np.asarray(im.convert("RGB"))


def load_corpus() -> dict[str, np.ndarray]:
    return {n: load_image(n) for n in corpus_names()}
