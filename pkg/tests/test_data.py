import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from ganforge.data import (
    Dataset,
    ImageDecodeError,
    SplitSpec,
    concat,
    cubic_kernel,
    load_cache,
    load_image_dir,
    resize_bicubic,
    save_cache,
    split,
    split_indices,
    synth_glyphs,
    synth_lungfields,
)
from ganforge.data.split import largest_remainder
from ganforge.mosaic import write_pnm


def direct_bicubic(img, oh, ow, a=-0.5):
    """Per-pixel kernel sums, written independently of the separable matrices."""

    def k(t):
        t = abs(t)
        if t <= 1:
            return (a + 2) * t**3 - (a + 3) * t**2 + 1
        if t < 2:
            return a * t**3 - 5 * a * t**2 + 8 * a * t - 4 * a
        return 0.0

    c, h, w = img.shape
    out = np.zeros((c, oh, ow))
    for ch in range(c):
        for i in range(oh):
            sy = (i + 0.5) * h / oh - 0.5
            for j in range(ow):
                sx = (j + 0.5) * w / ow - 0.5
                acc = 0.0
                for ty in range(math.floor(sy) - 1, math.floor(sy) + 3):
                    for tx in range(math.floor(sx) - 1, math.floor(sx) + 3):
                        yy, xx = min(max(ty, 0), h - 1), min(max(tx, 0), w - 1)
                        acc += k(sy - ty) * k(sx - tx) * img[ch, yy, xx]
                out[ch, i, j] = acc
    return np.clip(out, img.min(), img.max())


# --- resize --------------------------------------------------------------------


def test_cubic_kernel_values():
    assert cubic_kernel(0.0) == 1.0
    assert cubic_kernel(1.0) == 0.0 and cubic_kernel(2.0) == 0.0
    assert cubic_kernel(0.5) == pytest.approx(0.5625)


def test_constant_image_stays_constant():
    img = np.full((2, 7, 5), 0.3)
    assert np.allclose(resize_bicubic(img, (64, 64)), 0.3, atol=1e-15)


def test_same_size_is_identity():
    img = np.random.default_rng(0).uniform(-1, 1, (3, 64, 64))
    assert np.array_equal(resize_bicubic(img), img)


def test_ramp_upscale_matches_direct_oracle():
    ramp = np.arange(16, dtype=float).reshape(1, 4, 4) / 15 * 2 - 1
    assert np.abs(resize_bicubic(ramp, (8, 8)) - direct_bicubic(ramp, 8, 8)).max() < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(1, 20), st.integers(1, 20), st.integers(0, 10_000))
def test_resize_matches_direct_oracle(h, w, oh, ow, seed):
    img = np.random.default_rng(seed).uniform(-1, 1, (1, h, w))
    assert np.abs(resize_bicubic(img, (oh, ow)) - direct_bicubic(img, oh, ow)).max() < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 80), st.integers(2, 80), st.integers(0, 10_000))
def test_resize_idempotent_and_in_range(h, w, seed):
    img = np.random.default_rng(seed).uniform(-1, 1, (1, h, w))
    once = resize_bicubic(img)
    assert np.array_equal(resize_bicubic(once), once)
    assert once.min() >= -1 and once.max() <= 1


def test_one_pixel_axis_falls_back_to_nearest():
    img = np.array([[[0.25, -0.5, 0.75]]])
    out = resize_bicubic(img, (4, 3))
    assert np.array_equal(out, np.repeat(img, 4, axis=1))


# --- dataset container -----------------------------------------------------------


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.full((1, 1, 64, 64), 1.1), [0], ["a"])
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 1, 64, 64)), [1], ["a"])
    Dataset(np.full((1, 1, 64, 64), 1 + 1e-10), [0], ["a"])


def test_cache_round_trip_and_idempotent_bytes(tmp_path):
    ds = synth_lungfields(3, 0.5, 0)
    save_cache(ds, tmp_path / "a")
    save_cache(load_cache(tmp_path / "a"), tmp_path / "b")
    back = load_cache(tmp_path / "b")
    assert np.array_equal(back.images, ds.images) and np.array_equal(back.labels, ds.labels)
    for name in ("images.gft", "labels.gft", "synthetic.gft", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_cache():
    with pytest.raises(FileNotFoundError):
        load_cache("/nonexistent/cache")


def test_concat_keeps_flags():
    a = synth_glyphs(2, 2, 0.0, 0)
    b = a.subset([0, 1])
    b.synthetic = np.ones(2, dtype=bool)
    c = concat(a, b)
    assert len(c) == 6 and c.synthetic.tolist() == [False] * 4 + [True] * 2


# --- loader ------------------------------------------------------------------------


def write_tree(root):
    (root / "b").mkdir(parents=True)
    (root / "a").mkdir()
    write_pnm(root / "a" / "x.pgm", np.full((1, 10, 12), 255, dtype=np.uint8))
    write_pnm(root / "a" / "y.pgm", np.zeros((1, 64, 64), dtype=np.uint8))
    Image.fromarray(np.full((30, 20, 3), 128, dtype=np.uint8)).save(root / "b" / "z.png")


def test_loader_assigns_sorted_labels(tmp_path):
    write_tree(tmp_path)
    ds = load_image_dir(tmp_path)
    assert len(ds) == 3 and ds.labels.tolist() == [0, 0, 1]
    assert ds.class_names == ["a", "b"]
    assert ds.images.shape == (3, 3, 64, 64)  # one colour file promotes everything
    assert np.allclose(ds.images[0], 1.0) and np.allclose(ds.images[1], -1.0)


def test_loader_deterministic_and_channel_override(tmp_path):
    write_tree(tmp_path)
    a, b = load_image_dir(tmp_path, channels=1), load_image_dir(tmp_path, channels=1)
    assert a.images.shape[1] == 1 and np.array_equal(a.images, b.images)


def test_loader_empty_class_kept(tmp_path, caplog):
    write_tree(tmp_path)
    (tmp_path / "c").mkdir()
    ds = load_image_dir(tmp_path)
    assert ds.class_names == ["a", "b", "c"]
    assert "empty" in caplog.text


def test_loader_names_bad_file(tmp_path):
    write_tree(tmp_path)
    (tmp_path / "a" / "broken.pgm").write_bytes(b"P5\n3 3\n255\n")
    with pytest.raises(ImageDecodeError, match="broken.pgm"):
        load_image_dir(tmp_path)


# --- split ---------------------------------------------------------------------------


def test_largest_remainder_sizes():
    assert largest_remainder(10, (0.8, 0.1, 0.1)) == [8, 1, 1]
    assert largest_remainder(7, (1 / 3, 1 / 3, 1 / 3)) == [3, 2, 2]


def test_split_all_train():
    ds = synth_glyphs(2, 3, 0.0, 0)
    train, val, test = split(ds, SplitSpec((1.0, 0.0, 0.0)))
    assert len(train) == 6 and len(val) == 0 and len(test) == 0


def test_split_sizes_unstratified():
    labels = np.zeros(10, dtype=int)
    parts = split_indices(labels, SplitSpec((0.8, 0.1, 0.1), 0, False))
    assert [len(p) for p in parts] == [8, 1, 1]


def test_stratified_half_half():
    ds = synth_glyphs(2, 10, 0.0, 0)
    a, b, c = split(ds, SplitSpec((0.5, 0.5, 0.0)))
    assert a.class_counts().tolist() == [5, 5] and b.class_counts().tolist() == [5, 5] and len(c) == 0
    assert (a.split_tag, b.split_tag) == ("train", "val")


def test_impossible_stratification():
    with pytest.raises(ValueError, match="cannot stratify"):
        split_indices(np.array([0, 0, 0, 1]), SplitSpec((0.4, 0.3, 0.3)))
    with pytest.raises(ValueError):
        SplitSpec((0.5, 0.4, 0.0))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 3), min_size=3, max_size=60),
    st.tuples(st.integers(1, 10), st.integers(0, 10), st.integers(1, 10)),
    st.integers(0, 1000),
    st.booleans(),
)
def test_split_disjoint_exhaustive_deterministic(labels, weights, seed, stratified):
    labels = np.array(labels)
    fractions = tuple(w / sum(weights) for w in weights)
    spec = SplitSpec(fractions, seed, stratified)
    try:
        parts = split_indices(labels, spec)
    except ValueError:
        assert stratified
        return
    joined = np.concatenate(parts)
    assert sorted(joined.tolist()) == list(range(len(labels)))
    again = split_indices(labels, spec)
    assert all(np.array_equal(x, y) for x, y in zip(parts, again))
    if stratified:
        for c in np.unique(labels):
            n_c = (labels == c).sum()
            for part, f in zip(parts, fractions):
                assert abs((labels[part] == c).sum() - f * n_c) < 1 + 1e-9


# --- toy generators ----------------------------------------------------------------------


def test_glyphs_balanced_and_ranged():
    ds = synth_glyphs(3, 5, 0.5, 0)
    assert len(ds) == 15 and ds.class_counts().tolist() == [5, 5, 5]
    assert ds.images.shape == (15, 3, 64, 64)
    assert ds.images.min() >= -1 and ds.images.max() <= 1


def test_glyphs_noise_zero_identical_within_class():
    ds = synth_glyphs(3, 4, 0.0, 1)
    for c in range(3):
        imgs = ds.images[ds.labels == c]
        assert all(np.array_equal(imgs[0], x) for x in imgs[1:])
    assert not np.array_equal(ds.images[ds.labels == 0][0], ds.images[ds.labels == 1][0])


def mean_within_class_distance(ds):
    out = []
    for c in range(ds.n_classes):
        x = ds.images[ds.labels == c].reshape((ds.labels == c).sum(), -1)
        d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
        out.append(d[np.triu_indices(len(x), 1)].mean())
    return float(np.mean(out))


def test_glyph_spread_grows_with_noise():
    spread = [np.mean([mean_within_class_distance(synth_glyphs(3, 8, nz, s)) for s in range(3)]) for nz in (0, 0.5, 1.0)]
    assert spread[0] < spread[1] < spread[2]


def test_glyph_class_limit():
    with pytest.raises(ValueError):
        synth_glyphs(11, 1)
    with pytest.raises(ValueError):
        synth_glyphs(2, 0)


def test_lungfields_shape_and_determinism():
    a, b = synth_lungfields(4, 0.0, 3), synth_lungfields(4, 0.0, 3)
    assert a.images.shape == (8, 1, 64, 64)
    assert np.array_equal(a.images, b.images)


def test_lungfield_classes_differ_in_blob_regions():
    ds = synth_lungfields(64, 0.5, 0)
    diff = np.abs(ds.images[ds.labels == 1].mean(0) - ds.images[ds.labels == 0].mean(0))[0]
    blob = diff > np.quantile(diff, 0.95)
    assert diff[blob].mean() > 0.1
