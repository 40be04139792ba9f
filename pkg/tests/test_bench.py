import numpy as np
import pytest

from aesthqr.bench import (
    CSV_FIELDS,
    BenchResult,
    PerturbationSpec,
    default_grid,
    eta_sweep,
    perturb,
    run_sweep,
    standard_items,
)
from aesthqr.pipeline import BeautifyConfig
from conftest import PAYLOAD


@pytest.fixture(scope="module")
def items():
    return standard_items(PAYLOAD, versions=[3, 6])


def _psnr(a, b):
    mse = np.mean((a.astype(float) - b.astype(float)) ** 2)
    return np.inf if mse == 0 else 10 * np.log10(255 ** 2 / mse)


def test_identity_perturbations(items):
    img = items[0].image
    assert np.array_equal(perturb(img, "brightness", 0), img)
    assert _psnr(perturb(img, "scale", 1.0), img) > 50
    assert np.array_equal(perturb(img, "coverage", 0, module_px=8), img)


def test_input_untouched(items):
    img = items[0].image
    before = img.copy()
    for kind, p in (("brightness", 50), ("scale", 0.5), ("rotate_x", 30), ("coverage", 5)):
        perturb(img, kind, p, module_px=items[0].module_px)
    assert np.array_equal(img, before)


def test_brightness_clips():
    img = np.array([[0, 100, 250]], dtype=np.uint8)
    assert perturb(img, "brightness", 20).tolist() == [[20, 120, 255]]
    assert perturb(img, "brightness", -120).tolist() == [[0, 0, 130]]


def test_scale_shape():
    assert perturb(np.zeros((100, 60), np.uint8), "scale", 0.5).shape == (50, 30)
    with pytest.raises(ValueError):
        perturb(np.zeros((10, 10), np.uint8), "scale", 0)


def test_rotation_canvas_and_z90(items):
    out = perturb(items[0].image, "rotate_z", 90)
    assert out.shape == (640, 640)
    assert out[0, 0] == 255
    rep = run_sweep(items[:1], PerturbationSpec("z", grid=(90,)))
    assert rep.rows[0][3] == "decoded"


def test_coverage_blocks_in_box(items):
    it = items[0]
    out = perturb(it.image, "coverage", 8, module_px=it.module_px, code_box=it.code_box,
                  rng=np.random.default_rng(1))
    x0, y0, x1, y1 = it.code_box
    diff = out != it.image
    assert diff.any()
    assert not diff[:y0].any() and not diff[y1:].any()
    assert not diff[:, :x0].any() and not diff[:, x1:].any()


def test_spec_validation():
    assert PerturbationSpec("x").kind == "rotate_x"
    assert PerturbationSpec("x").grid == tuple(range(-60, 61, 15))
    with pytest.raises(ValueError):
        PerturbationSpec("shear")
    with pytest.raises(ValueError):
        PerturbationSpec("coverage", grid=(1.5,))
    with pytest.raises(ValueError):
        PerturbationSpec("scale", reps=0)
    assert default_grid("scale")[0] == 0.05 and default_grid("scale")[-1] == 3.0


def test_empty_items():
    res = run_sweep([], PerturbationSpec("brightness", grid=(0,)))
    assert res.rows == []
    assert res.to_csv() == ",".join(CSV_FIELDS) + "\n"


def test_standard_brightness_band(items):
    res = run_sweep(items, PerturbationSpec("brightness", grid=tuple(range(-80, 81, 40))))
    assert all(v == 1.0 for v in res.success_rates("brightness").values())


def test_coverage_sweep_deterministic(items):
    spec = PerturbationSpec("coverage", grid=(0, 4, 8), seed=3, reps=2)
    a, b = run_sweep(items, spec), run_sweep(items, spec)
    assert a.to_csv() == b.to_csv()
    rates = a.success_rates("coverage")
    assert rates[0] == 1.0
    assert list(rates.values()) == sorted(rates.values(), reverse=True)
    ids = {r[2] for r in a.rows}
    assert "standard_v3#01" in ids


def test_parallel_matches_serial(items):
    spec = PerturbationSpec("scale", grid=(0.5, 1.5))
    assert run_sweep(items, spec, n_jobs=2).to_csv() == run_sweep(items, spec).to_csv()


def test_csv_format():
    res = BenchResult([("scale", 0.5, "a", "decoded", 0), ("scale", 1.0, "a", "detect_failed", 0)])
    lines = res.to_csv().splitlines()
    assert lines == ["kind,parameter,image_id,outcome,corrections",
                     "scale,0.5,a,decoded,0", "scale,1,a,detect_failed,0"]
    assert res.success_rates() == {0.5: 1.0, 1.0: 0.0}


def test_svg(tmp_path):
    pytest.importorskip("matplotlib")
    res = BenchResult([("scale", 0.5, "a", "decoded", 0), ("scale", 1.0, "a", "decoded", 0)])
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    res.plot_svg(p1)
    res.plot_svg(p2)
    assert p1.read_text().startswith("<?xml")
    assert p1.read_bytes() == p2.read_bytes()


def test_eta_sweep_rows(corpus):
    cfg = BeautifyConfig(PAYLOAD)
    res = eta_sweep({"astronaut": corpus["astronaut"]}, cfg, etas=[1.0],
                    fixture=(("brightness", 0),))
    assert res.rows == [("eta", 1.0, "astronaut@brightness=0", "decoded", 0)]
