import numpy as np
import pytest

from hftp import alignment
from hftp.errors import (
    DegenerateFeatureError,
    IncompleteDesignError,
    UndefinedRatioError,
    UndefinedTestError,
    ValidationError,
)
from hftp.ingest import CONDITION_ORDER, UnitId, channel_metas_from_layout
from hftp.alignment import (
    SRDM,
    ConditionFeatures,
    brain_condition_features,
    contribution_ratio,
    layer_srdm,
    model_brain_similarity,
    model_condition_features,
    model_region_similarity,
    one_way_anova,
    overlap_chi_square,
    rank_channels,
    rsa_spearman,
    srdm,
    top_k_channels,
    upper_triangle,
)
from hftp.probe_brain import ChannelClassification

from conftest import make_activation, make_recording
from oracles import (
    anova_oneway,
    chi_square_2x2,
    cosine_dissimilarity_matrix,
    s_model_brain,
    s_model_region,
    spearman,
    top_k_by_score,
)
import oracles


def features_from(vectors, owner=0):
    vectors = np.asarray(vectors, dtype=np.float64)
    return ConditionFeatures(
        owner=owner, freqs=np.arange(vectors.shape[1], dtype=float), vectors=vectors
    )


def random_srdm(rng, owner=0):
    return srdm(features_from(rng.random((6, 5)) + 0.1, owner=owner))


class TestConditionFeatures:
    def _tensors(self, rng, boost_cond=None, trial_len=36, n_trials=4):
        tensors = {}
        for cond in CONDITION_ORDER:
            values = rng.normal(size=(1, 2, n_trials * trial_len))
            if boost_cond is not None and cond == boost_cond:
                tt = np.arange(n_trials * trial_len) / 4.0
                values[0, 0] += 10 * np.cos(2 * np.pi * 1.0 * tt)
            tensors[cond] = make_activation(values)
        return tensors

    def test_duplicate_condition_data_gives_identical_rows(self, rng):
        base = rng.normal(size=(1, 1, 144))
        tensors = {cond: make_activation(base) for cond in CONDITION_ORDER}
        f = model_condition_features(tensors, UnitId(0, 0))
        assert np.allclose(f.vectors, f.vectors[0])

    def test_band_limits(self, rng):
        f = model_condition_features(self._tensors(rng), UnitId(0, 0))
        assert f.freqs.min() > 0
        assert f.freqs.max() <= 2.0 + 1e-9
        # 32-sample window at 4 Hz: bins 0.125 .. 2.0
        assert f.freqs.size == 16

    def test_condition_boost_is_visible_only_there(self, rng):
        boosted = CONDITION_ORDER[0]
        f = model_condition_features(self._tensors(rng, boost_cond=boosted), UnitId(0, 0))
        k = int(np.argmin(np.abs(f.freqs - 1.0)))
        row = list(CONDITION_ORDER).index(boosted)
        others = np.delete(np.arange(6), row)
        assert f.vectors[row, k] > 3 * f.vectors[others, k].max()

    def test_all_noise_features_positive(self, rng):
        f = model_condition_features(self._tensors(rng), UnitId(0, 1))
        assert np.all(f.vectors > 0)

    def test_missing_condition_rejected(self, rng):
        tensors = self._tensors(rng)
        del tensors[CONDITION_ORDER[3]]
        with pytest.raises(IncompleteDesignError):
            model_condition_features(tensors, UnitId(0, 0))

    def test_brain_features_shape(self, rng):
        recs = {
            cond: make_recording(rng.normal(size=(2, 4, 36 * 16)), rate_hz=64.0)
            for cond in CONDITION_ORDER
        }
        f = brain_condition_features(recs, 1)
        assert f.vectors.shape == (6, 16)
        assert np.all(f.vectors >= 0) and np.all(f.vectors <= 1)


class TestSrdm:
    def test_identical_conditions_give_zero_matrix(self):
        m = srdm(features_from(np.tile([1.0, 2.0, 3.0], (6, 1))))
        assert np.allclose(m.d, 0.0)

    def test_orthogonal_vectors_give_one(self):
        vectors = np.eye(6)
        m = srdm(features_from(vectors))
        off = upper_triangle(m.d)
        assert np.allclose(off, 1.0)

    def test_matches_bruteforce(self, rng):
        vectors = rng.random((6, 7)) + 0.05
        m = srdm(features_from(vectors))
        assert np.max(np.abs(m.d - cosine_dissimilarity_matrix(vectors))) < 1e-12

    def test_symmetry_zero_diagonal_range(self, rng):
        m = random_srdm(rng)
        assert np.allclose(m.d, m.d.T)
        assert np.all(np.diag(m.d) == 0)
        assert np.all(m.d >= 0) and np.all(m.d <= 2)

    def test_scale_invariance(self, rng):
        vectors = rng.random((6, 5)) + 0.1
        scaled = vectors.copy()
        scaled[2] *= 37.5
        a = srdm(features_from(vectors))
        b = srdm(features_from(scaled))
        assert np.max(np.abs(a.d - b.d)) < 1e-12

    def test_zero_norm_vector_rejected(self):
        vectors = np.ones((6, 4))
        vectors[3] = 0.0
        with pytest.raises(DegenerateFeatureError):
            srdm(features_from(vectors))


class TestLayerSrdm:
    def test_single_input_identity(self, rng):
        m = random_srdm(rng)
        assert np.array_equal(layer_srdm([m]).d, m.d)

    def test_complementary_pair_averages_to_one(self, rng):
        m = random_srdm(rng)
        mirror = SRDM(owner=1, d=2.0 - m.d)
        avg = layer_srdm([m, mirror])
        off = upper_triangle(avg.d)
        assert np.allclose(off, 1.0)

    def test_matches_bruteforce_mean(self, rng):
        mats = [random_srdm(rng, owner=i) for i in range(5)]
        avg = layer_srdm(mats)
        assert np.max(np.abs(avg.d - np.mean([m.d for m in mats], axis=0))) < 1e-15

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            layer_srdm([])


class TestRsaSpearman:
    def test_self_correlation_is_one(self, rng):
        m = random_srdm(rng)
        assert rsa_spearman(m, m) == 1.0

    def test_order_reversal_is_minus_one(self, rng):
        m = random_srdm(rng)
        rev = SRDM(owner=1, d=2.0 - m.d)
        assert abs(rsa_spearman(m, rev) + 1.0) < 1e-12

    def test_matches_bruteforce(self, rng):
        a, b = random_srdm(rng), random_srdm(rng, owner=1)
        expected = spearman(upper_triangle(a.d), upper_triangle(b.d))
        assert abs(rsa_spearman(a, b) - expected) < 1e-12

    def test_monotone_transform_invariance(self, rng):
        a, b = random_srdm(rng), random_srdm(rng, owner=1)
        warped = SRDM(owner=2, d=np.exp(3.0 * b.d))
        assert abs(rsa_spearman(a, b) - rsa_spearman(a, warped)) < 1e-12

    def test_degenerate_reported_as_zero_with_flag(self):
        flat = SRDM(owner=0, d=np.zeros((6, 6)))
        other = SRDM(owner=1, d=np.ones((6, 6)) - np.eye(6))
        with pytest.warns(RuntimeWarning):
            assert rsa_spearman(flat, other) == 0.0


class TestTopK:
    def test_all_channels_sorted(self, rng):
        layer = random_srdm(rng, owner="L0")
        chans = [random_srdm(rng, owner=i) for i in range(6)]
        sel = top_k_channels(layer, chans, k=6)
        assert len(sel.channel_ids) == 6
        assert list(sel.rhos) == sorted(sel.rhos, reverse=True)

    def test_planted_match_ranks_first(self, rng):
        layer = random_srdm(rng, owner="L0")
        noise = [random_srdm(rng, owner=i) for i in range(5)]
        twin = SRDM(owner=99, d=layer.d.copy())
        sel = top_k_channels(layer, noise + [twin], k=3)
        assert sel.channel_ids[0] == 99
        assert sel.rhos[0] == 1.0

    def test_ties_broken_by_lower_id(self, rng):
        layer = random_srdm(rng, owner="L0")
        twin_a = SRDM(owner=7, d=layer.d.copy())
        twin_b = SRDM(owner=3, d=layer.d.copy())
        sel = top_k_channels(layer, [twin_a, twin_b], k=2)
        assert sel.channel_ids == (3, 7)

    def test_oversized_k_clips_with_warning(self, rng):
        layer = random_srdm(rng, owner="L0")
        chans = [random_srdm(rng, owner=i) for i in range(3)]
        with pytest.warns(RuntimeWarning):
            sel = top_k_channels(layer, chans, k=100)
        assert len(sel.channel_ids) == 3 and sel.clipped


class TestChiSquare:
    def _cls(self, n, significant):
        metas = channel_metas_from_layout([("L", "Heschl")] * n)
        classes = tuple("sentence" if i in significant else "none" for i in range(n))
        return ChannelClassification(channels=metas, classes=classes)

    def test_fixture_value(self):
        # contingency [[30,20],[10,40]]
        sel = alignment.TopKSelection(layer=0, channel_ids=tuple(range(50)), rhos=(0.0,) * 50)
        significant = set(range(30)) | set(range(50, 60))
        c = self._cls(100, significant)
        chi2, p = overlap_chi_square(sel, c)
        assert abs(chi2 - 16.6667) < 1e-3
        assert abs(chi2 - chi_square_2x2(30, 20, 10, 40)) < 1e-9
        assert abs(p - 4.45e-5) < 1e-6

    def test_independence_fixture_is_zero(self):
        # top half and significant half overlap proportionally
        sel = alignment.TopKSelection(layer=0, channel_ids=tuple(range(10)), rhos=(0.0,) * 10)
        significant = {0, 1, 2, 3, 4, 10, 11, 12, 13, 14}
        chi2, p = overlap_chi_square(sel, self._cls(20, significant))
        assert abs(chi2) < 1e-12
        assert abs(p - 1.0) < 1e-12

    def test_zero_margin_rejected(self):
        sel = alignment.TopKSelection(layer=0, channel_ids=(0, 1), rhos=(0.0, 0.0))
        with pytest.raises(UndefinedTestError):
            overlap_chi_square(sel, self._cls(4, {0, 1, 2, 3}))  # all significant


def micro_instance(rng, n_layers=3, n_channels=8):
    layer_mats = {f"L{j}": random_srdm(rng, owner=f"L{j}") for j in range(n_layers)}
    chan_mats = {i: random_srdm(rng, owner=i) for i in range(n_channels)}
    rois = {i: ("A1" if i < 3 else "STG" if i < 6 else "IFG") for i in range(n_channels)}
    return layer_mats, chan_mats, rois


class TestSummaryMetrics:
    def test_constant_rho_table(self):
        sels = [
            alignment.TopKSelection(layer=j, channel_ids=(0, 1), rhos=(0.5, 0.5))
            for j in range(3)
        ]
        assert model_brain_similarity(sels) == 0.5

    def test_micro_instance_matches_bruteforce(self, rng):
        k = 3
        layer_mats, chan_mats, rois = micro_instance(rng)
        selections = []
        oracle_sel = []
        for name in sorted(layer_mats):
            scores = {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()}
            sel = rank_channels(scores, k, layer=name)
            selections.append(sel)
            ids = top_k_by_score(scores, k)
            assert list(sel.channel_ids) == ids
            oracle_sel.append((ids, [scores[c] for c in ids]))

        s = model_brain_similarity(selections)
        assert abs(s - s_model_brain([rhos for _, rhos in oracle_sel])) < 1e-12

        for roi in ("A1", "STG", "IFG"):
            ours = model_region_similarity(selections, rois, roi)
            ref = s_model_region(oracle_sel, rois, roi)
            if ref is None:
                assert ours is None
            else:
                assert abs(ours - ref) < 1e-12

        for sel, (ids, _) in zip(selections, oracle_sel):
            for roi in ("A1", "STG", "IFG"):
                assert (
                    abs(contribution_ratio(sel, rois, roi) - oracles.contribution_ratio(ids, rois, roi))
                    < 1e-12
                )

    def test_region_covering_everything_equals_global(self, rng):
        layer_mats, chan_mats, _ = micro_instance(rng)
        rois = {i: "A1" for i in chan_mats}
        selections = [
            rank_channels(
                {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()},
                3,
                layer=name,
            )
            for name in sorted(layer_mats)
        ]
        assert (
            abs(model_region_similarity(selections, rois, "A1") - model_brain_similarity(selections))
            < 1e-12
        )

    def test_absent_region_gives_sentinel(self, rng):
        layer_mats, chan_mats, rois = micro_instance(rng)
        selections = [
            rank_channels(
                {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()},
                3,
                layer=name,
            )
            for name in sorted(layer_mats)
        ]
        assert model_region_similarity(selections, rois, "Amygdala") is None

    def test_layer_order_invariance(self, rng):
        layer_mats, chan_mats, _ = micro_instance(rng)
        selections = [
            rank_channels(
                {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()},
                4,
                layer=name,
            )
            for name in sorted(layer_mats)
        ]
        assert model_brain_similarity(selections) == model_brain_similarity(selections[::-1])
        all_rhos = [r for sel in selections for r in sel.rhos]
        assert min(all_rhos) <= model_brain_similarity(selections) <= max(all_rhos)

    def test_weighted_region_mean_reconstructs_global(self, rng):
        # sum over regions of n(j,r)-weighted per-layer means equals k * layer mean
        layer_mats, chan_mats, rois = micro_instance(rng)
        k = 4
        selections = [
            rank_channels(
                {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()},
                k,
                layer=name,
            )
            for name in sorted(layer_mats)
        ]
        regions = sorted(set(rois.values()))
        total = 0.0
        for sel in selections:
            acc = 0.0
            for roi in regions:
                vals = [r for cid, r in zip(sel.channel_ids, sel.rhos) if rois[cid] == roi]
                acc += sum(vals)
            total += acc / k
        assert abs(total / len(selections) - model_brain_similarity(selections)) < 1e-12

    def test_cr_partition_identities(self, rng):
        layer_mats, chan_mats, rois = micro_instance(rng)
        k = 5
        selections = [
            rank_channels(
                {cid: rsa_spearman(layer_mats[name], m) for cid, m in chan_mats.items()},
                k,
                layer=name,
            )
            for name in sorted(layer_mats)
        ]
        regions = sorted(set(rois.values()))
        n_total = len(rois)
        for sel in selections:
            counts = {
                roi: sum(1 for cid in sel.channel_ids if rois[cid] == roi) for roi in regions
            }
            assert sum(counts.values()) == k
            weighted = sum(
                contribution_ratio(sel, rois, roi)
                * (sum(1 for r in rois.values() if r == roi) / n_total)
                for roi in regions
            )
            assert abs(weighted - 1.0) < 1e-12

    def test_cr_simple_arithmetic(self):
        # 10 of 100 top channels from a region holding 20 of 400 channels -> 2.0
        rois = {i: ("X" if i < 20 else "Y") for i in range(400)}
        ids = tuple(range(10)) + tuple(range(20, 110))
        sel = alignment.TopKSelection(layer=0, channel_ids=ids, rhos=(0.0,) * 100)
        assert abs(contribution_ratio(sel, rois, "X") - 2.0) < 1e-12

    def test_cr_region_share_matches_global_share(self):
        rois = {i: ("X" if i < 5 else "Y") for i in range(20)}
        # top 4 holds 1 X of 4 -> share 0.25 = global share 5/20
        ids = (0, 5, 6, 7)
        sel = alignment.TopKSelection(layer=0, channel_ids=ids, rhos=(0.0,) * 4)
        assert abs(contribution_ratio(sel, rois, "X") - 1.0) < 1e-12

    def test_cr_absent_region_is_zero(self):
        rois = {i: ("X" if i < 5 else "Y") for i in range(10)}
        sel = alignment.TopKSelection(layer=0, channel_ids=(5, 6), rhos=(0.0, 0.0))
        assert contribution_ratio(sel, rois, "X") == 0.0

    def test_cr_empty_region_rejected(self):
        rois = {i: "Y" for i in range(10)}
        sel = alignment.TopKSelection(layer=0, channel_ids=(0,), rhos=(0.0,))
        with pytest.raises(UndefinedRatioError):
            contribution_ratio(sel, rois, "X")


class TestAnova:
    def test_identical_groups(self):
        res = one_way_anova([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
        assert res.f_stat == 0.0
        assert res.eta_squared == 0.0

    def test_zero_within_variance_guard(self):
        res = one_way_anova([[0.0, 0.0], [1.0, 1.0]])
        assert res.f_stat >= 1e100 and np.isfinite(res.f_stat)
        assert res.p_value == 0.0
        assert res.eta_squared == 1.0

    def test_matches_bruteforce(self, rng):
        groups = [rng.normal(loc=i, size=8) for i in range(4)]
        res = one_way_anova(groups)
        f_ref, eta_ref = anova_oneway(groups)
        assert abs(res.f_stat - f_ref) < 1e-10
        assert abs(res.eta_squared - eta_ref) < 1e-10

    def test_preconditions(self):
        with pytest.raises(ValidationError):
            one_way_anova([[1.0, 2.0]])
        with pytest.raises(ValidationError):
            one_way_anova([[1.0], [2.0, 3.0]])


class TestReportAssembly:
    def test_report_end_to_end_micro(self, rng):
        trial_len, n_trials = 36, 3
        tensors = {}
        for cond in CONDITION_ORDER:
            values = rng.normal(size=(2, 4, n_trials * trial_len))
            tensors[cond] = make_activation(values)
        layout = [("L", "Heschl")] * 3 + [("R", "Heschl")] * 3
        recordings = {
            cond: make_recording(
                rng.normal(size=(6, 4, trial_len * 16)), rate_hz=64.0, layout=layout
            )
            for cond in CONDITION_ORDER
        }
        unit_classes = {
            "sentence": [UnitId(0, 0), UnitId(1, 1)],
            "phrase": [UnitId(0, 1)],
            "both": [],
        }
        metas = channel_metas_from_layout(layout)
        channel_cls = ChannelClassification(
            channels=metas, classes=("sentence", "none", "none", "phrase", "none", "none")
        )
        report = alignment.build_alignment_report(
            tensors, recordings, unit_classes, channel_cls, k=2, trial_len=trial_len
        )
        assert set(report["classes"]) == {"sentence", "phrase", "both", "pooled"}
        assert report["classes"]["both"] is None
        pooled_l = report["classes"]["pooled"]["L"]
        assert set(pooled_l["top"]) == {"0", "1"}
        for entries in pooled_l["top"].values():
            assert len(entries) == 2
        assert report["mean_across_classes"]["L"]["s_mb"] is not None
        assert "chi_square" in report

    def test_report_degrades_gracefully_without_classified_units(self, rng):
        trial_len, n_trials = 36, 3
        tensors = {
            cond: make_activation(rng.normal(size=(1, 2, n_trials * trial_len)))
            for cond in CONDITION_ORDER
        }
        recordings = {
            cond: make_recording(rng.normal(size=(2, 4, trial_len * 16)), rate_hz=64.0)
            for cond in CONDITION_ORDER
        }
        report = alignment.build_alignment_report(
            tensors,
            recordings,
            {"sentence": [], "phrase": [], "both": []},
            None,
            k=2,
            trial_len=trial_len,
        )
        assert report["classes"]["pooled"] is None
        assert report["mean_across_classes"]["L"]["s_mb"] is None
        assert report["chi_square"] is None
