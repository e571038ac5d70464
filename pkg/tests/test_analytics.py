import math

import numpy as np
import pytest

from regibox.analytics import (
    EvalReport,
    Protocol,
    accuracy,
    apply_protocol,
    extended_accuracy,
    rank_classes_by_dimension,
    rank_classes_by_volume,
    region_stats,
    run_protocol,
)
from regibox.boxnet import BoxNetModel, Stage1Config
from regibox.errors import ValidationError
from regibox.probe import ProbeConfig
from regibox.sampler import AugmentationConfig
from regibox.store import EmbeddingSet
from regibox.synthetic import BundleSpec, generate_bundle

from conftest import unit_rows


def corners_model(a_hat, b_hat):
    d = len(a_hat)
    return BoxNetModel(
        layer_dims=[d, 2 * d],
        weights=[np.zeros((d, 2 * d))],
        biases=[np.concatenate([a_hat, b_hat])],
        activation="linear",
    )


def labeled_set(rng, labels, d=2):
    labels = np.asarray(labels, dtype=np.uint32)
    return EmbeddingSet(unit_rows(rng, len(labels), d).astype(np.float32), labels)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(np.array([1, 2, 3]), np.array([1, 2, 3])) == 1.0

    def test_all_wrong(self):
        assert accuracy(np.array([0, 0]), np.array([1, 2])) == 0.0

    def test_three_of_four(self):
        assert accuracy(np.array([1, 2, 3, 4]), np.array([1, 2, 3, 0])) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            accuracy(np.array([1]), np.array([1, 2]))

    def test_empty(self):
        with pytest.raises(ValidationError):
            accuracy(np.array([]), np.array([]))


class TestExtendedAccuracy:
    def test_pooled_counts(self):
        assert abs(extended_accuracy([(80, 100), (30, 50)]) - 110 / 150) < 1e-12

    def test_single_domain_identity(self):
        assert extended_accuracy([(7, 10)]) == 0.7

    def test_equal_sizes_symmetry(self):
        assert extended_accuracy([(50, 50), (0, 50)]) == 0.5

    def test_pooled_not_average(self):
        # unequal domains: pooling must differ from the mean of accuracies
        pooled = extended_accuracy([(90, 100), (5, 10)])
        mean_of_acc = (0.9 + 0.5) / 2
        assert abs(pooled - 95 / 110) < 1e-12
        assert pooled != mean_of_acc

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            extended_accuracy([])


class TestRegionStats:
    def test_unit_sides_give_zero_log_volume(self, rng):
        # corners with both sides exactly 1
        a_hat = np.array([1.0, 0.0])
        b_hat = np.array([0.0, 1.0])
        model = corners_model(a_hat, b_hat)
        stats = region_stats(model, labeled_set(rng, [0, 0]))
        assert np.allclose(stats.side_lengths, 1.0)
        assert np.allclose(stats.log_volumes, 0.0, atol=1e-12)

    def test_half_sides_arithmetic(self, rng):
        # chord of the unit circle with difference vector (0.5, 0.5)
        t = np.array([0.25, 0.25])
        m = math.sqrt(0.875) * np.array([1.0, -1.0]) / math.sqrt(2.0)
        model = corners_model(m + t, m - t)
        stats = region_stats(model, labeled_set(rng, [0]))
        assert np.allclose(stats.side_lengths, 0.5, atol=1e-12)
        assert abs(stats.log_volumes[0] - 2 * math.log(0.5)) < 1e-9

    def test_zero_width_boxes_clamped(self, rng):
        v = np.array([0.6, 0.8])
        model = corners_model(v, v)
        stats = region_stats(model, labeled_set(rng, [0]), epsilon=1e-12)
        assert stats.log_volumes[0] == 2 * math.log(1e-12)

    def test_log_volume_monotone_in_sides(self, rng):
        base = corners_model(np.array([1.0, 0.0]), np.array([0.8, 0.6]))
        bigger = corners_model(np.array([1.0, 0.0]), np.array([0.6, 0.8]))
        data = labeled_set(rng, [0])
        assert (
            region_stats(bigger, data).log_volumes[0]
            > region_stats(base, data).log_volumes[0]
        )

    def test_class_aggregation(self, rng):
        model = corners_model(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        stats = region_stats(model, labeled_set(rng, [0, 1, 1]))
        assert list(stats.class_ids) == [0, 1]
        assert stats.class_mean_side_lengths.shape == (2, 2)


class TestRankings:
    def _stats(self, rng, model_pairs, labels):
        # one constant-box model cannot vary per class; fake stats instead
        from regibox.analytics import RegionStats

        side_lengths = np.array(model_pairs)
        log_volumes = np.log(np.maximum(side_lengths, 1e-12)).sum(axis=1)
        labels = np.asarray(labels)
        class_ids = np.unique(labels)
        return RegionStats(
            log_volumes=log_volumes,
            side_lengths=side_lengths,
            labels=labels,
            n_classes=int(class_ids.max()) + 1,
            class_ids=class_ids,
            class_mean_log_volume=np.array(
                [log_volumes[labels == c].mean() for c in class_ids]
            ),
            class_mean_side_lengths=np.stack(
                [side_lengths[labels == c].mean(axis=0) for c in class_ids]
            ),
        )

    def test_volume_ordering(self, rng):
        stats = self._stats(rng, [[0.4, 0.9], [0.1, 0.5]], [0, 1])
        assert rank_classes_by_volume(stats) == [0, 1]
        stats2 = self._stats(rng, [[0.1, 0.5], [0.4, 0.9]], [0, 1])
        assert rank_classes_by_volume(stats2) == [1, 0]

    def test_volume_tie_goes_to_lower_index(self, rng):
        stats = self._stats(rng, [[0.3, 0.3], [0.3, 0.3]], [0, 1])
        assert rank_classes_by_volume(stats) == [0, 1]

    def test_dimension_ordering(self, rng):
        stats = self._stats(rng, [[0.4, 0.1], [0.2, 0.3]], [0, 1])
        assert rank_classes_by_dimension(stats, 0) == [0, 1]
        assert rank_classes_by_dimension(stats, 1) == [1, 0]

    def test_degenerate_boxes_rank_by_index(self, rng):
        stats = self._stats(rng, [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], [0, 1, 2])
        assert rank_classes_by_dimension(stats, 0) == [0, 1, 2]

    def test_missing_class_warns(self, rng):
        # volumes: class 0 has 0.4*0.1 = 0.04, class 2 has 0.2*0.3 = 0.06
        stats = self._stats(rng, [[0.4, 0.1], [0.2, 0.3]], [0, 2])
        with pytest.warns(UserWarning, match="without images"):
            order = rank_classes_by_volume(stats)
        assert order == [2, 0]

    def test_dimension_out_of_range(self, rng):
        stats = self._stats(rng, [[0.4, 0.1]], [0])
        with pytest.raises(ValidationError, match="dim_index"):
            rank_classes_by_dimension(stats, 2)


@pytest.fixture(scope="module")
def small_bundle():
    return generate_bundle(
        BundleSpec(
            dim=12,
            n_classes=3,
            per_class=12,
            spread_sigma=0.1,
            seed=4,
            val_per_class=4,
            test_per_class=10,
        )
    )


class TestProtocols:
    def test_few_shot_with_all_items_is_standard(self, small_bundle):
        out = apply_protocol(small_bundle.train, Protocol.few_shot(12), 3, seed=1)
        assert np.array_equal(out.data, small_bundle.train.data)
        assert np.array_equal(out.labels, small_bundle.train.labels)

    def test_imbalanced_zero_percent_is_standard(self, small_bundle):
        out = apply_protocol(small_bundle.train, Protocol.imbalanced(0, 5), 3, seed=1)
        assert np.array_equal(out.data, small_bundle.train.data)

    def test_few_shot_counts(self, small_bundle):
        out = apply_protocol(small_bundle.train, Protocol.few_shot(5), 3, seed=2)
        assert np.array_equal(np.bincount(out.labels, minlength=3), [5, 5, 5])

    def test_imbalanced_counts(self, small_bundle):
        out = apply_protocol(small_bundle.train, Protocol.imbalanced(100, 2), 3, seed=2)
        assert np.array_equal(np.bincount(out.labels, minlength=3), [2, 2, 2])

    def test_few_shot_too_large_rejected(self, small_bundle):
        with pytest.raises(ValidationError, match="cannot keep"):
            apply_protocol(small_bundle.train, Protocol.few_shot(13), 3, seed=1)

    def test_deterministic(self, small_bundle):
        one = apply_protocol(small_bundle.train, Protocol.few_shot(4), 3, seed=9)
        two = apply_protocol(small_bundle.train, Protocol.few_shot(4), 3, seed=9)
        assert np.array_equal(one.data, two.data)


class TestRunProtocol:
    def test_zero_shot_report_shape(self, small_bundle):
        report = run_protocol(small_bundle, Protocol.standard(), "zero_shot", [1, 2, 3])
        assert len(report.per_seed) == 3
        # zero-shot ignores the seed: identical rows
        first = {k: v for k, v in report.per_seed[0].items() if k != "seed"}
        second = {k: v for k, v in report.per_seed[1].items() if k != "seed"}
        assert first == second
        assert report.std["in_domain"] == 0.0

    def test_extended_is_pooled(self, small_bundle):
        report = run_protocol(small_bundle, Protocol.standard(), "zero_shot", [1])
        row = report.per_seed[0]
        c_in, t_in = row["in_domain_counts"]
        c_out, t_out = row["out_domain_counts"]
        assert row["extended"] == (c_in + c_out) / (t_in + t_out)

    def test_mean_std_recomputable(self, small_bundle):
        report = run_protocol(
            small_bundle,
            Protocol.few_shot(6),
            "probe",
            [1, 2, 3],
            probe_config=ProbeConfig(epochs=10, batch_size=16),
        )
        values = [row["extended"] for row in report.per_seed]
        assert abs(report.mean["extended"] - np.mean(values)) < 1e-9
        assert abs(report.std["extended"] - np.std(values)) < 1e-9

    def test_missing_out_domain_reported_as_none(self, small_bundle):
        from regibox.store import DatasetBundle

        bundle = DatasetBundle(
            train=small_bundle.train,
            val=small_bundle.val,
            test_in_domain=small_bundle.test_in_domain,
            test_out_domain=None,
            class_text=small_bundle.class_text,
        )
        report = run_protocol(bundle, Protocol.standard(), "zero_shot", [1])
        assert report.per_seed[0]["out_domain"] is None
        assert report.mean["out_domain"] is None
        assert report.per_seed[0]["extended"] == report.per_seed[0]["in_domain"]

    def test_augmented_method_runs(self, small_bundle):
        report = run_protocol(
            small_bundle,
            Protocol.standard(),
            "augmented",
            [1],
            stage1_config=Stage1Config(alpha=0.9, epochs=20, batch_size=8),
            augment_config=AugmentationConfig(samples_per_image=2),
            probe_config=ProbeConfig(epochs=10, batch_size=16),
        )
        assert 0.0 <= report.per_seed[0]["extended"] <= 1.0

    def test_empty_seeds_rejected(self, small_bundle):
        with pytest.raises(ValidationError, match="seeds"):
            run_protocol(small_bundle, Protocol.standard(), "zero_shot", [])

    def test_unknown_method_rejected(self, small_bundle):
        with pytest.raises(ValidationError, match="method"):
            run_protocol(small_bundle, Protocol.standard(), "nearest", [1])
