"""Error-analysis tests: characteristic bins, false-positive taxonomy,
miss profiles, sensitivity, and the layer smoothness probe."""

import numpy as np
import pytest

from freqtad.diagnostics import (CATEGORIES, CHARACTERISTICS, FNProfile,
                                 bin_characteristics, categorize, classify_fp,
                                 fn_profile, layer_similarity,
                                 sensitivity_profile)
from freqtad.model import Detector, ModelConfig
from freqtad.sequence import ActionInstance, DetectionCandidate


def act(start, end, label=0):
    return ActionInstance(start, end, label)


def cand(vid, label, score, start, end):
    return DetectionCandidate(vid, label, score, start, end)


class TestCharacteristicBins:
    def test_coverage_boundaries(self):
        # upper edges are inclusive
        assert bin_characteristics(act(0, 2.0), 100.0, 1).coverage == "XS"
        assert bin_characteristics(act(0, 2.0001), 100.0, 1).coverage == "S"
        assert bin_characteristics(act(0, 6.0), 100.0, 1).coverage == "M"
        assert bin_characteristics(act(0, 50.0), 100.0, 1).coverage == "XL"

    def test_length_boundaries(self):
        assert bin_characteristics(act(0, 3.0), 100.0, 1).length == "XS"
        assert bin_characteristics(act(0, 3.5), 100.0, 1).length == "S"
        assert bin_characteristics(act(0, 10.0), 100.0, 1).length == "M"
        assert bin_characteristics(act(0, 18.0), 100.0, 1).length == "L"
        assert bin_characteristics(act(10, 40.0), 100.0, 1).length == "XL"

    def test_count_boundaries(self):
        assert bin_characteristics(act(0, 5), 100.0, 1).count == "XS"
        assert bin_characteristics(act(0, 5), 100.0, 2).count == "S"
        assert bin_characteristics(act(0, 5), 100.0, 40).count == "S"
        assert bin_characteristics(act(0, 5), 100.0, 41).count == "M"
        assert bin_characteristics(act(0, 5), 100.0, 81).count == "L"

    def test_validation(self):
        with pytest.raises(ValueError):
            bin_characteristics(act(0, 5), 0.0, 1)
        with pytest.raises(ValueError):
            bin_characteristics(act(0, 5), 10.0, 0)


class TestCategorize:
    @pytest.fixture
    def gts(self):
        return {"v": [act(10, 20, 0), act(50, 60, 0), act(30, 40, 1)]}

    def test_each_category_reachable(self, gts):
        preds = [
            cand("v", 0, 0.95, 10, 20),   # exact match
            cand("v", 0, 0.85, 50, 60),   # exact match
            cand("v", 0, 0.75, 10, 20),   # repeats an already-matched GT
            cand("v", 0, 0.65, 16, 26),   # weak overlap with own class
            cand("v", 0, 0.55, 34, 45),   # weak overlap with other class only
            cand("v", 0, 0.45, 70, 80),   # touches nothing
        ]
        assert categorize(preds, gts, 0.5) == [
            "true-positive", "true-positive", "double-detection",
            "localization", "confusion", "background"]

    def test_wrong_label(self, gts):
        preds = [cand("v", 1, 0.9, 30, 40), cand("v", 1, 0.8, 10, 20)]
        assert categorize(preds, gts, 0.5) == ["true-positive", "wrong-label"]

    def test_double_detection_beats_wrong_label(self):
        # same interval holds GT of both classes; the repeat stays a
        # double-detection even though the other class also overlaps
        gts = {"v": [act(10, 20, 0), act(10, 20, 1)]}
        preds = [cand("v", 0, 0.9, 10, 20), cand("v", 0, 0.8, 10, 20)]
        assert categorize(preds, gts, 0.5) == ["true-positive",
                                               "double-detection"]

    def test_greedy_takes_best_unmatched(self):
        gts = {"v": [act(0, 10, 0), act(12, 22, 0)]}
        preds = [cand("v", 0, 0.9, 1, 11), cand("v", 0, 0.8, 1, 11)]
        cats = categorize(preds, gts, 0.5)
        # second pred cannot claim the far GT, so it repeats the first
        assert cats == ["true-positive", "double-detection"]

    def test_empty(self, gts):
        assert categorize([], gts, 0.5) == []


class TestClassifyFP:
    @pytest.fixture
    def scene(self):
        gts = {"v1": [act(10, 20, 0), act(50, 60, 0)],
               "v2": [act(30, 40, 1)]}
        preds = {
            "v1": [cand("v1", 0, 0.95, 10, 20),
                   cand("v1", 0, 0.85, 50, 60),
                   cand("v1", 0, 0.75, 10, 20),
                   cand("v1", 0, 0.65, 16, 26),
                   cand("v1", 0, 0.55, 70, 80),
                   cand("v1", 1, 0.80, 10, 20),
                   cand("v1", 1, 0.70, 16, 26)],
            "v2": [cand("v2", 1, 0.90, 30, 40)],
        }
        return preds, gts

    def test_counts_by_budget(self, scene):
        preds, gts = scene
        profile = classify_fp(preds, gts, tiou=0.5, k_max=3,
                              thresholds=(0.5,))
        assert profile.counts[1] == {
            "true-positive": 3, "double-detection": 0, "wrong-label": 0,
            "localization": 0, "confusion": 0, "background": 0}
        assert profile.counts[2] == {
            "true-positive": 3, "double-detection": 1, "wrong-label": 1,
            "localization": 1, "confusion": 0, "background": 0}
        assert profile.counts[3] == {
            "true-positive": 3, "double-detection": 1, "wrong-label": 1,
            "localization": 1, "confusion": 1, "background": 1}

    def test_counts_partition_retained_predictions(self, scene):
        preds, gts = scene
        profile = classify_fp(preds, gts, tiou=0.5, k_max=3,
                              thresholds=(0.5,))
        # class 0 has 5 preds / 2 GT, class 1 has 3 preds / 1 GT
        expected_totals = {1: 2 + 1, 2: 4 + 2, 3: 5 + 3}
        for k, tally in profile.counts.items():
            assert set(tally) == set(CATEGORIES)
            assert sum(tally.values()) == expected_totals[k]

    def test_impact_zero_when_errors_rank_below_hits(self, scene):
        preds, gts = scene
        profile = classify_fp(preds, gts, tiou=0.5, k_max=3,
                              thresholds=(0.5,))
        for gain in profile.impact.values():
            assert gain == pytest.approx(0.0, abs=1e-12)

    def test_impact_measures_high_ranked_noise(self):
        gts = {"v": [act(10, 20, 0)]}
        preds = {"v": [cand("v", 0, 0.9, 70, 80),
                       cand("v", 0, 0.8, 10, 20)]}
        profile = classify_fp(preds, gts, tiou=0.5, k_max=2,
                              thresholds=(0.5,))
        assert profile.impact["background"] == pytest.approx(0.5)
        for cat in ("double-detection", "wrong-label", "localization",
                    "confusion"):
            assert profile.impact[cat] == pytest.approx(0.0, abs=1e-12)

    def test_impact_never_negative(self, scene):
        preds, gts = scene
        profile = classify_fp(preds, gts, tiou=0.5, k_max=3)
        for gain in profile.impact.values():
            assert gain >= -1e-12

    def test_thresholds_recorded(self, scene):
        preds, gts = scene
        assert classify_fp(preds, gts, thresholds=(0.3, 0.7)).thresholds \
            == (0.3, 0.7)
        default = classify_fp(preds, gts)
        assert default.thresholds[0] == pytest.approx(0.5)
        assert default.thresholds[-1] == pytest.approx(0.95)
        assert len(default.thresholds) == 10

    def test_k_max_validated(self, scene):
        preds, gts = scene
        with pytest.raises(ValueError):
            classify_fp(preds, gts, k_max=0)


class TestFNProfile:
    def test_perfect_predictions_miss_nothing(self):
        gts = {"v": [act(10, 20, 0), act(30, 33, 0)]}
        preds = {"v": [cand("v", 0, 0.9, 10, 20), cand("v", 0, 0.8, 30, 33)]}
        profile = fn_profile(preds, gts, {"v": 100.0})
        assert profile.overall == 0.0
        for char in CHARACTERISTICS:
            assert all(rate == 0.0 for rate in profile.rates[char].values())

    def test_no_predictions_miss_everything(self):
        gts = {"v": [act(10, 20, 0), act(30, 33, 0)]}
        profile = fn_profile({}, gts, {"v": 100.0})
        assert profile.overall == 1.0
        for char in CHARACTERISTICS:
            assert all(rate == 1.0 for rate in profile.rates[char].values())

    def test_miss_lands_in_the_right_bin(self):
        # 10 s segment (bin M) found, 3 s segment (bin XS) missed
        gts = {"v": [act(10, 20, 0), act(30, 33, 0)]}
        preds = {"v": [cand("v", 0, 0.9, 10, 20)]}
        profile = fn_profile(preds, gts, {"v": 100.0})
        assert profile.overall == 0.5
        assert profile.rates["length"] == {"M": 0.0, "XS": 1.0}
        assert profile.rates["count"] == {"S": 0.5}
        assert profile.rates["coverage"] == {"XL": 0.0, "S": 1.0}

    def test_overall_is_one_minus_recall(self):
        gts = {"v": [act(i * 20, i * 20 + 10, 0) for i in range(4)]}
        preds = {"v": [cand("v", 0, 0.9, 0, 10),
                       cand("v", 0, 0.8, 20, 30),
                       cand("v", 0, 0.7, 40, 50)]}
        profile = fn_profile(preds, gts, {"v": 200.0})
        assert profile.overall == pytest.approx(0.25)

    def test_returns_profile_type(self):
        gts = {"v": [act(10, 20, 0)]}
        assert isinstance(fn_profile({}, gts, {"v": 50.0}), FNProfile)


class TestSensitivityProfile:
    @pytest.fixture
    def split_scene(self):
        # one long covered action, one short missed action
        gts = {"v": [act(0, 30, 0), act(50, 52, 0)]}
        preds = {"v": [cand("v", 0, 0.9, 0, 30)]}
        return preds, gts, {"v": 100.0}

    def test_two_bin_split(self, split_scene):
        preds, gts, durations = split_scene
        profile = sensitivity_profile(preds, gts, durations,
                                      thresholds=(0.5,))
        assert profile.overall == pytest.approx(0.5)
        assert profile.maps["length"]["XL"] == pytest.approx(1.0)
        assert profile.maps["length"]["XS"] == pytest.approx(0.0)
        assert profile.relative["length"]["XL"] == pytest.approx(1.0)
        assert profile.relative["length"]["XS"] == pytest.approx(-1.0)

    def test_single_bin_matches_overall(self, split_scene):
        preds, gts, durations = split_scene
        profile = sensitivity_profile(preds, gts, durations,
                                      thresholds=(0.5,))
        # both segments share the count bin, so restriction is a no-op
        assert profile.maps["count"] == {"S": pytest.approx(0.5)}
        assert profile.relative["count"]["S"] == pytest.approx(0.0)

    def test_unpopulated_bins_absent(self, split_scene):
        preds, gts, durations = split_scene
        profile = sensitivity_profile(preds, gts, durations,
                                      thresholds=(0.5,))
        assert set(profile.maps["length"]) == {"XS", "XL"}
        assert profile.bins("length") == ["XL", "XS"]

    def test_out_of_bin_predictions_count_against(self):
        # restriction shrinks GT only; the other bin's (correct) prediction
        # becomes a rank-1 false positive for the short bin
        gts = {"v": [act(0, 30, 0), act(50, 52, 0)]}
        preds = {"v": [cand("v", 0, 0.9, 0, 30), cand("v", 0, 0.8, 50, 52)]}
        profile = sensitivity_profile(preds, gts, {"v": 100.0},
                                      thresholds=(0.5,))
        assert profile.overall == pytest.approx(1.0)
        assert profile.maps["length"]["XL"] == pytest.approx(1.0)
        assert profile.maps["length"]["XS"] == pytest.approx(0.5)
        assert profile.relative["length"]["XS"] == pytest.approx(-0.5)


class TestLayerSimilarity:
    @pytest.fixture
    def model(self):
        cfg = ModelConfig(input_dim=4, num_classes=2, cutoff=2,
                          num_downsamples=1, blocks_per_level=1, latent_dim=4,
                          head_width=4, head_depth=1, seed=0)
        return Detector(cfg)

    def test_constant_signal_is_perfectly_smooth(self, model):
        features = np.tile(np.array([1.0, -0.5, 2.0, 0.25]), (16, 1))
        sims = layer_similarity(model, features)
        assert sims["input"] == pytest.approx(1.0)
        assert "enhanced" in sims and "level0" in sims and "level1" in sims

    def test_orthogonal_alternation_scores_zero(self, model):
        features = np.zeros((16, 4))
        features[0::2, 0] = 1.0
        features[1::2, 1] = 1.0
        assert layer_similarity(model, features)["input"] \
            == pytest.approx(0.0, abs=1e-12)

    def test_values_are_cosines(self, model):
        rng = np.random.default_rng(3)
        sims = layer_similarity(model, rng.normal(size=(24, 4)))
        for value in sims.values():
            assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9

    def test_zero_rows_are_skipped(self, model):
        sims = layer_similarity(model, np.zeros((16, 4)))
        assert "input" not in sims
