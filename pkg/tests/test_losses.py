import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from descforge.correspond import CorrespondenceSet, find_correspondences
from descforge.errors import EmptySet, ShapeMismatch
from descforge.losses import contrastive_loss, supervised_l2_loss


def pair_set(matches_a=(), matches_b=(), nm_obj=((), ()), nm_bg=((), ())):
    def arr(x, dtype):
        return np.asarray(x, dtype=dtype).reshape(-1, 2)

    return CorrespondenceSet(
        matches_a=arr(matches_a, int), matches_b=arr(matches_b, float),
        non_matches_object_a=arr(nm_obj[0], int), non_matches_object_b=arr(nm_obj[1], int),
        non_matches_background_a=arr(nm_bg[0], int), non_matches_background_b=arr(nm_bg[1], int),
    )


def flat_image(values):
    """1 x n x D image from a list of per-pixel descriptors."""
    return np.asarray(values, dtype=np.float64)[None, :, :]


class TestContrastive:
    def test_identity_matches_zero(self):
        img = flat_image([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]])
        pairs = pair_set(matches_a=[(0, 0), (1, 0), (2, 0)],
                         matches_b=[(0.5, 0.5), (1.5, 0.5), (2.5, 0.5)])
        out = contrastive_loss(img, img, pairs)
        assert out.match_loss == 0.0
        assert out.nonmatch_loss == 0.0
        assert out.total == 0.0

    def test_single_nonmatch_hand_value(self):
        # descriptor distance 0.3 against margin 0.5 -> (0.5 - 0.3)^2 = 0.04
        img_a = flat_image([[0.0, 0.0]])
        img_b = flat_image([[0.3, 0.0]])
        pairs = pair_set(nm_obj=([(0, 0)], [(0, 0)]))
        out = contrastive_loss(img_a, img_b, pairs, margin_object=0.5)
        assert np.isclose(out.nonmatch_loss, 0.04, atol=1e-12)
        assert out.match_loss == 0.0
        assert np.isclose(out.total, 0.04)

    def test_hinge_inactive_beyond_margin(self):
        img_a = flat_image([[0.0, 0.0]])
        img_b = flat_image([[0.9, 0.0]])
        pairs = pair_set(nm_obj=([(0, 0)], [(0, 0)]))
        out = contrastive_loss(img_a, img_b, pairs, margin_object=0.5)
        assert out.nonmatch_loss == 0.0

    def test_margins_by_type(self):
        img_a = flat_image([[0.0, 0.0]])
        img_b = flat_image([[1.0, 0.0]])
        obj_only = contrastive_loss(img_a, img_b, pair_set(nm_obj=([(0, 0)], [(0, 0)])),
                                    margin_object=0.5, margin_background=2.5)
        bg_only = contrastive_loss(img_a, img_b, pair_set(nm_bg=([(0, 0)], [(0, 0)])),
                                   margin_object=0.5, margin_background=2.5)
        assert obj_only.nonmatch_loss == 0.0           # 1.0 >= 0.5
        assert np.isclose(bg_only.nonmatch_loss, 2.25)  # (2.5 - 1.0)^2

    def test_normalization_by_total_nonmatches(self):
        img_a = flat_image([[0.0, 0.0], [0.0, 0.0]])
        img_b = flat_image([[0.3, 0.0], [1.0, 0.0]])
        pairs = pair_set(nm_obj=([(0, 0)], [(0, 0)]), nm_bg=([(0, 0)], [(1, 0)]))
        out = contrastive_loss(img_a, img_b, pairs, 0.5, 2.5)
        expected = ((0.5 - 0.3) ** 2 + (2.5 - 1.0) ** 2) / 2.0
        assert np.isclose(out.nonmatch_loss, expected, atol=1e-12)

    def test_match_mean_of_squared_distance(self):
        img_a = flat_image([[0.0, 0.0], [0.0, 0.0]])
        img_b = flat_image([[0.3, 0.4], [0.0, 1.0]])
        pairs = pair_set(matches_a=[(0, 0), (1, 0)],
                         matches_b=[(0.5, 0.5), (1.5, 0.5)])
        out = contrastive_loss(img_a, img_b, pairs)
        assert np.isclose(out.match_loss, (0.25 + 1.0) / 2.0, atol=1e-12)

    def test_empty_set(self):
        img = flat_image([[0.0, 0.0]])
        with pytest.raises(EmptySet):
            contrastive_loss(img, img, pair_set())

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            contrastive_loss(flat_image([[0.0]]), flat_image([[0.0, 0.0]]),
                             pair_set(matches_a=[(0, 0)], matches_b=[(0.5, 0.5)]))

    @given(st.integers(0, 2 ** 31 - 1), st.integers(1, 12), st.integers(0, 12),
           st.integers(0, 12))
    @settings(max_examples=40, deadline=None)
    def test_swap_symmetry(self, seed, n_match, n_obj, n_bg):
        rng = np.random.default_rng(seed)
        img_a = rng.uniform(size=(6, 8, 3))
        img_b = rng.uniform(size=(6, 8, 3))

        def pix(count):
            return np.stack([rng.integers(0, 8, count), rng.integers(0, 6, count)],
                            axis=1)

        pairs = pair_set(
            matches_a=pix(n_match),
            matches_b=pix(n_match).astype(float) + 0.5,
            nm_obj=(pix(n_obj), pix(n_obj)),
            nm_bg=(pix(n_bg), pix(n_bg)),
        )
        fwd = contrastive_loss(img_a, img_b, pairs)
        bwd = contrastive_loss(img_b, img_a, pairs.swapped())
        assert abs(fwd.total - bwd.total) < 1e-12
        assert abs(fwd.match_loss - bwd.match_loss) < 1e-12
        assert abs(fwd.nonmatch_loss - bwd.nonmatch_loss) < 1e-12
        assert fwd.total >= 0.0

    def test_ground_truth_matches_near_zero(self, blob_scene):
        # rendered targets are near-minimizers of the match term: corresponding
        # pixels carry the same surface descriptor up to interpolation
        fa, fb = blob_scene.frames[0].image, blob_scene.frames[2].image
        pairs = find_correspondences(fa, fb, 300, 0, seed=1)
        out = contrastive_loss(fa.descriptors, fb.descriptors, pairs)
        assert out.match_loss < 1e-3  # small frame; acceptance tightens this


class TestSupervisedL2:
    def test_zero_when_equal(self, blob_scene):
        img = blob_scene.frames[0].image
        out = supervised_l2_loss(img.descriptors.copy(), img)
        assert out.total == 0.0

    def test_constant_offset_on_object(self, blob_scene):
        img = blob_scene.frames[0].image
        c = 0.125
        pred = img.descriptors.astype(np.float64).copy()
        pred[img.mask] += c
        out = supervised_l2_loss(pred, img)
        d = img.dim
        assert np.isclose(out.object_loss, d * c * c, atol=1e-9)
        assert out.background_loss == 0.0
        assert np.isclose(out.total, d * c * c, atol=1e-9)

    def test_empty_mask_convention(self, blob_scene):
        img = blob_scene.frames[0].image
        empty = img.copy_with(mask=np.zeros_like(img.mask),
                              depth=np.zeros_like(img.depth))
        out = supervised_l2_loss(empty.descriptors.copy(), empty)
        assert out.object_loss == 0.0
        assert out.total == 0.0

    def test_shape_mismatch(self, blob_scene):
        img = blob_scene.frames[0].image
        with pytest.raises(ShapeMismatch):
            supervised_l2_loss(img.descriptors[:, :, :1], img)

    def test_ratio_invariance(self):
        # constant per-pixel error in each region: loss independent of the
        # object/background pixel ratio
        from descforge.camera import CameraIntrinsics, RigidTransform
        from descforge.render import DescriptorImage

        def build(h, w, n_obj):
            mask = np.zeros((h, w), dtype=bool)
            mask.reshape(-1)[:n_obj] = True
            desc = np.zeros((h, w, 2), dtype=np.float32)
            intr = CameraIntrinsics(float(w), float(w), w / 2.0, h / 2.0, w, h)
            depth = np.where(mask, 100, 0).astype(np.uint16)
            return DescriptorImage(desc, mask, depth, intr,
                                   RigidTransform.identity(), RigidTransform.identity())

        for h, w, n_obj in ((8, 8, 4), (8, 8, 40), (16, 16, 200)):
            img = build(h, w, n_obj)
            pred = img.descriptors.astype(np.float64).copy()
            pred[img.mask] += 0.2
            pred[~img.mask] += 0.1
            out = supervised_l2_loss(pred, img)
            assert np.isclose(out.object_loss, 2 * 0.04, atol=1e-12)
            assert np.isclose(out.background_loss, 2 * 0.01, atol=1e-12)

    def test_nonnegative(self, blob_scene):
        rng = np.random.default_rng(3)
        img = blob_scene.frames[1].image
        pred = rng.uniform(size=img.descriptors.shape)
        out = supervised_l2_loss(pred, img)
        assert out.object_loss >= 0 and out.background_loss >= 0
        assert np.isclose(out.total, out.object_loss + out.background_loss, atol=1e-9)
