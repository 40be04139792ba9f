import numpy as np
import pytest

from aesthqr.bench import perturb
from aesthqr.exceptions import ImageTooSmall
from aesthqr.qr_symbol import FUNCTION, QUIET_ZONE, QrSpec, encode_symbol, render_matrix
from aesthqr.scanner import (
    BLOCK,
    QRScanner,
    block_thresholds,
    detect_finders,
    hybrid_binarize,
    scan,
)
from conftest import PAYLOAD, naive_binarize, naive_thresholds


@pytest.mark.parametrize("flat_rule", [True, False])
@pytest.mark.parametrize("seed", range(5))
def test_binarizer_matches_naive(seed, flat_rule):
    rng = np.random.default_rng(seed)
    h, w = rng.integers(40, 90, 2)
    gray = rng.integers(0, 256, (h, w)).astype(np.uint8)
    # flat patches exercise the low-dynamic-range branch
    gray[5:30, 10:40] = rng.integers(0, 20)
    assert np.allclose(block_thresholds(gray, flat_rule), naive_thresholds(gray, flat_rule))
    assert np.array_equal(hybrid_binarize(gray, flat_rule), naive_binarize(gray, flat_rule))


def test_uniform_image():
    gray = np.full((64, 64), 120, dtype=np.uint8)
    assert np.allclose(block_thresholds(gray, flat_block_rule=False), 120)
    assert hybrid_binarize(gray, flat_block_rule=False).all()
    assert hybrid_binarize(gray).all()


@pytest.mark.parametrize("flat_rule", [True, False])
def test_half_split(flat_rule):
    gray = np.full((80, 96), 30, dtype=np.uint8)
    gray[:, 48:] = 230
    b = hybrid_binarize(gray, flat_rule)
    assert b[:, 48:].all()
    # within two blocks of the edge the 5x5 neighborhood sees both halves
    assert not b[:, 48 - 2 * BLOCK:48].any()


def test_too_small():
    with pytest.raises(ImageTooSmall):
        hybrid_binarize(np.zeros((39, 100), dtype=np.uint8))
    assert scan(np.zeros((20, 20), dtype=np.uint8)).outcome == "detect_failed"


def _code(version=2, ec="M", mask=0, payload=PAYLOAD[:20]):
    m = encode_symbol(payload, QrSpec(version, ec, mask))
    img = render_matrix(m.dark, size=512)
    a = 512 // (m.side + 2 * QUIET_ZONE)
    off = (512 - m.side * a) // 2
    return m, img, a, off


@pytest.mark.parametrize("version", [1, 4, 7, 10])
def test_finder_centers(version):
    m, img, a, off = _code(version, payload="finder")
    (tl, tr, bl), size = detect_finders(hybrid_binarize(img))
    far = off + (m.side - 3.5) * a
    near = off + 3.5 * a
    for c, (x, y) in ((tl, (near, near)), (tr, (far, near)), (bl, (near, far))):
        assert abs(c.x - x) <= 0.5 * a and abs(c.y - y) <= 0.5 * a
    assert abs(size - a) <= 0.5 * a


def test_pristine_roundtrip():
    m, img, _, _ = _code(5, "Q", 3)
    rep = scan(img, ground_truth=m)
    assert rep.ok and rep.payload == PAYLOAD[:20].encode()
    assert rep.corrections == 0
    assert rep.error_mask.sum() == 0


def test_blank_image_fails():
    rep = scan(np.full((200, 200), 255, dtype=np.uint8))
    assert rep.outcome == "detect_failed" and rep.payload is None


def test_rotated_90_and_scaled():
    m, img, _, _ = _code(3)
    assert scan(np.rot90(img).copy()).payload == PAYLOAD[:20].encode()
    assert scan(perturb(img, "scale", 2.0)).ok
    assert scan(perturb(img, "rotate_z", 90)).ok


def test_single_module_fault():
    m, img, a, off = _code(2)
    ys, xs = np.nonzero(m.role != FUNCTION)
    i, j = ys[len(ys) // 2], xs[len(xs) // 2]
    bad = img.copy()
    bad[off + i * a: off + (i + 1) * a, off + j * a: off + (j + 1) * a] = 0 if not m.dark[i, j] else 255
    rep = scan(bad, ground_truth=m)
    assert rep.ok and rep.corrections == 1
    assert rep.error_mask.sum() == 1 and rep.error_mask[i, j]
    ov = rep.overlay(4)
    assert ov.shape == (m.side * 4, m.side * 4, 3)
    assert ov[i * 4, j * 4].tolist() == [220, 30, 30]


def test_scan_is_pure():
    _, img, _, _ = _code(2)
    before = img.copy()
    r1, r2 = scan(img), scan(img)
    assert np.array_equal(img, before)
    assert r1.to_json() == r2.to_json()


def test_report_without_truth_has_no_overlay():
    _, img, _, _ = _code(2)
    with pytest.raises(ValueError):
        scan(img).overlay()


def test_rgb_input():
    _, img, _, _ = _code(2)
    assert scan(np.stack([img] * 3, axis=-1)).ok


def test_estimator():
    m, img, _, _ = _code(2)
    sc = QRScanner().fit()
    want = PAYLOAD[:20]
    assert sc.predict(img) == [want.encode()]
    blank = np.full_like(img, 255)
    assert sc.score([img, blank], [want, want]) == 0.5
    assert sc.get_params() == {"max_triples": 3}
    with pytest.raises(ValueError):
        sc.score([img], [want, want])
