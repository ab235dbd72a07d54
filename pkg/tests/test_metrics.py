"""Fairness metrics, homophily stratification, and design comparison."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from homofair.generate import GeneratorConfig, NodeAttributes, generate
from homofair.graph import LocalHomophilyProfile, homophily_profile
from homofair.metrics import (
    DesignComparison,
    FairnessReport,
    HomophilyBin,
    StratifiedReport,
    accuracy,
    design_comparison,
    equal_opportunity,
    f1_binary,
    fairness_report,
    high_hs_slice,
    statistical_parity,
    stratified_report,
    stratify,
)
from homofair.models import Predictions


def preds_of(pred_labels) -> Predictions:
    pred = np.asarray(pred_labels, dtype=np.int64)
    return Predictions(predicted_class=pred,
                       prob_class1=np.where(pred == 1, 0.75, 0.25))


def attrs_of(class_labels, sensitive) -> NodeAttributes:
    cls = np.asarray(class_labels, dtype=np.int64)
    sens = np.asarray(sensitive, dtype=np.int64)
    return NodeAttributes(class_labels=cls, sensitive=sens,
                          features=np.zeros((cls.shape[0], 1)))


def profile_of(class_hom, sens_hom) -> LocalHomophilyProfile:
    ch = np.asarray(class_hom, dtype=np.float64)
    sh = np.asarray(sens_hom, dtype=np.float64)
    return LocalHomophilyProfile(class_hom={1: ch, 2: ch},
                                 sens_hom={1: sh, 2: sh})


def report_of(f1=0.5, acc=0.5, sp=0.0, eo=0.0) -> FairnessReport:
    return FairnessReport(f1=f1, accuracy=acc, delta_sp=sp, delta_eo=eo,
                          group_counts=None)


def stratified_of(cells: dict) -> StratifiedReport:
    """cells: {(class_bin, sens_bin): FairnessReport}"""
    return StratifiedReport(
        bins={HomophilyBin(*key): (rep, 10) for key, rep in cells.items()},
        undefined_node_count=0, k=1)


class TestStatisticalParity:
    def test_equal_rates_give_zero(self):
        got = statistical_parity(preds_of([1, 0, 1, 0]),
                                 np.array([1, 1, 0, 0]), np.arange(4))
        assert got == 0.0

    def test_direct_counting_example(self):
        # Group-1 positive rate 2/3, group-0 rate 1/2.
        got = statistical_parity(preds_of([1, 0, 1, 1, 0]),
                                 np.array([1, 1, 1, 0, 0]), np.arange(5))
        assert got == abs(2 / 3 - 1 / 2)
        assert got == pytest.approx(1 / 6)

    def test_single_group_subset_is_undefined(self):
        got = statistical_parity(preds_of([1, 0, 1]), np.array([1, 1, 1]),
                                 np.arange(3))
        assert got is None

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError, match="empty subset"):
            statistical_parity(preds_of([1, 0]), np.array([1, 0]),
                               np.array([], dtype=np.int64))

    def test_mask_and_id_subsets_agree(self):
        preds = preds_of([1, 0, 1, 1, 0, 1])
        sens = np.array([1, 0, 1, 0, 1, 0])
        mask = np.array([True, True, False, True, True, False])
        assert statistical_parity(preds, sens, mask) == \
            statistical_parity(preds, sens, np.flatnonzero(mask))


class TestEqualOpportunity:
    def test_direct_counting_example(self):
        # Among truly positive nodes: group-1 rate 1/2, group-0 rate 1.
        got = equal_opportunity(preds_of([1, 0, 1, 1]), np.array([1, 1, 1, 1]),
                                np.array([1, 1, 0, 0]), np.arange(4))
        assert got == 0.5

    def test_perfect_classifier_gives_zero(self):
        truth = np.array([1, 0, 1, 0, 1])
        got = equal_opportunity(preds_of(truth), truth,
                                np.array([1, 0, 0, 1, 1]), np.arange(5))
        assert got == 0.0

    def test_no_positive_nodes_is_undefined(self):
        got = equal_opportunity(preds_of([1, 0]), np.array([0, 0]),
                                np.array([1, 0]), np.arange(2))
        assert got is None

    def test_one_sided_positives_is_undefined(self):
        # Positives exist but only in sensitive group 1.
        got = equal_opportunity(preds_of([1, 1, 0]), np.array([1, 1, 0]),
                                np.array([1, 1, 0]), np.arange(3))
        assert got is None


class TestF1AndAccuracy:
    def test_half_precision_half_recall(self):
        got = f1_binary(preds_of([1, 1, 0, 0]), np.array([1, 0, 1, 0]),
                        np.arange(4))
        assert got == 0.5

    def test_perfect_predictions(self):
        truth = np.array([1, 0, 1])
        assert f1_binary(preds_of(truth), truth, np.arange(3)) == 1.0
        assert accuracy(preds_of(truth), truth, np.arange(3)) == 1.0

    def test_all_negative_with_positives_present(self):
        got = f1_binary(preds_of([0, 0, 0]), np.array([1, 1, 0]), np.arange(3))
        assert got == 0.0

    def test_empty_subset_rejected(self):
        with pytest.raises(ValueError, match="empty subset"):
            f1_binary(preds_of([1]), np.array([1]), np.array([], dtype=np.int64))


class TestOracleEquivalence:
    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_all_metrics_match_direct_counting(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 100))
        pred = rng.integers(0, 2, size=n)
        truth = rng.integers(0, 2, size=n)
        sens = rng.integers(0, 2, size=n)
        size = int(rng.integers(1, n + 1))
        idx = rng.choice(n, size=size, replace=False)
        preds = preds_of(pred)
        assert statistical_parity(preds, sens, idx) == \
            oracles.statistical_parity(pred, sens, idx)
        assert equal_opportunity(preds, truth, sens, idx) == \
            oracles.equal_opportunity(pred, truth, sens, idx)
        assert f1_binary(preds, truth, idx) == oracles.f1(pred, truth, idx)
        assert accuracy(preds, truth, idx) == oracles.accuracy(pred, truth, idx)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_node_reordering_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 60))
        pred = rng.integers(0, 2, size=n)
        truth = rng.integers(0, 2, size=n)
        sens = rng.integers(0, 2, size=n)
        idx = rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False)
        perm = rng.permutation(n)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n)
        base = fairness_report(preds_of(pred), truth, sens, idx)
        moved = fairness_report(preds_of(pred[perm]), truth[perm], sens[perm],
                                inv[idx])
        assert base.f1 == moved.f1
        assert base.accuracy == moved.accuracy
        assert base.delta_sp == moved.delta_sp
        assert base.delta_eo == moved.delta_eo

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_sensitive_group_swap_invariance(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        pred = rng.integers(0, 2, size=n)
        truth = rng.integers(0, 2, size=n)
        sens = rng.integers(0, 2, size=n)
        idx = np.arange(n)
        preds = preds_of(pred)
        assert statistical_parity(preds, sens, idx) == \
            statistical_parity(preds, 1 - sens, idx)
        assert equal_opportunity(preds, truth, sens, idx) == \
            equal_opportunity(preds, truth, 1 - sens, idx)


class TestFairnessReport:
    def test_group_counts(self):
        rep = fairness_report(preds_of([1, 0, 1, 0]), np.array([1, 1, 0, 0]),
                              np.array([1, 0, 1, 0]), np.arange(4))
        # counts[s][c]
        assert rep.group_counts.tolist() == [[1, 1], [1, 1]]
        assert rep.n_nodes == 4

    def test_undefined_deltas_propagate_as_none(self):
        rep = fairness_report(preds_of([1, 0]), np.array([1, 0]),
                              np.array([1, 1]), np.arange(2))
        assert rep.delta_sp is None
        assert rep.delta_eo is None
        assert 0.0 <= rep.f1 <= 1.0

    def test_counts_not_preserved_raises(self):
        with pytest.raises(ValueError, match="not preserved"):
            _ = report_of().n_nodes


class TestStratify:
    def test_example_bin_assignment(self):
        prof = profile_of([0.95], [0.1])
        bins, undef = stratify(prof, 1, np.arange(1))
        assert list(bins) == [HomophilyBin(class_bin=4, sens_bin=0)]
        assert undef.size == 0

    def test_one_point_zero_lands_in_top_bin(self):
        bins, _ = stratify(profile_of([1.0], [1.0]), 1, np.arange(1))
        assert list(bins) == [HomophilyBin(class_bin=4, sens_bin=4)]

    def test_partition_with_undefined(self, rng):
        n = 1000
        ch = rng.random(n)
        sh = rng.random(n)
        ch[rng.choice(n, 40, replace=False)] = np.nan
        bins, undef = stratify(profile_of(ch, sh), 1, np.arange(n))
        total = sum(ids.size for ids in bins.values()) + undef.size
        assert total == n
        assert undef.size == 40

    def test_respects_eval_subset(self):
        prof = profile_of([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        bins, _ = stratify(prof, 1, np.array([1]))
        assert list(bins) == [HomophilyBin(class_bin=2, sens_bin=2)]
        assert bins[HomophilyBin(2, 2)].tolist() == [1]

    def test_bin_index_validation(self):
        with pytest.raises(ValueError, match="bin index"):
            HomophilyBin(5, 0)
        b = HomophilyBin(3, 1)
        assert b.class_range == pytest.approx((0.6, 0.8))
        assert b.sens_range == pytest.approx((0.2, 0.4))


class TestStratifiedReport:
    def test_degenerate_single_bin_equals_global(self):
        # Complete graph, identical labels: every node sits at (1.0, 1.0).
        n = 6
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
        from homofair.graph import Graph
        g = Graph.from_edges(n, edges)
        attrs = attrs_of(np.ones(n, dtype=int), np.ones(n, dtype=int))
        prof = homophily_profile(g, attrs.class_labels, attrs.sensitive)
        preds = preds_of([1, 0, 1, 1, 0, 1])
        rep = stratified_report(preds, attrs, prof, k=1)
        assert list(rep.bins) == [HomophilyBin(4, 4)]
        bin_rep, count = rep.bins[HomophilyBin(4, 4)]
        direct = fairness_report(preds, attrs.class_labels, attrs.sensitive,
                                 np.arange(n))
        assert count == n
        assert bin_rep.f1 == direct.f1
        assert bin_rep.accuracy == direct.accuracy
        assert bin_rep.delta_sp == direct.delta_sp

    def test_per_bin_metrics_match_direct_calls(self, rng):
        cfg = GeneratorConfig(n_nodes=150, edges_per_node=4, h_c=0.7, h_s=0.3,
                              seed=5)
        g, attrs = generate(cfg)
        prof = homophily_profile(g, attrs.class_labels, attrs.sensitive)
        preds = preds_of(rng.integers(0, 2, size=150))
        rep = stratified_report(preds, attrs, prof, k=1)
        binned, undefined = stratify(prof, 1, np.arange(150))
        assert rep.n_evaluated == 150
        assert rep.undefined_node_count == undefined.size
        for b, ids in binned.items():
            bin_rep, count = rep.bins[b]
            assert count == ids.size
            direct = fairness_report(preds, attrs.class_labels,
                                     attrs.sensitive, ids)
            assert bin_rep.f1 == direct.f1
            assert bin_rep.delta_sp == direct.delta_sp
            assert bin_rep.delta_eo == direct.delta_eo

    def test_undefined_deltas_stay_undefined_per_bin(self):
        # Both nodes in one bin share the sensitive value.
        prof = profile_of([0.5, 0.5], [0.5, 0.5])
        attrs = attrs_of([1, 0], [1, 1])
        rep = stratified_report(preds_of([1, 0]), attrs, prof, k=1)
        assert rep.metric(HomophilyBin(2, 2), "delta_sp") is None
        assert rep.metric(HomophilyBin(2, 2), "f1") == 1.0

    def test_eval_nodes_restriction(self):
        prof = profile_of([0.1, 0.9, 0.9], [0.1, 0.9, 0.9])
        attrs = attrs_of([1, 0, 1], [0, 1, 0])
        rep = stratified_report(preds_of([1, 1, 0]), attrs, prof, k=1,
                                eval_nodes=np.array([1, 2]))
        assert rep.n_evaluated == 2
        assert HomophilyBin(0, 0) not in rep.bins

    def test_metric_of_absent_bin_is_none(self):
        rep = stratified_of({(0, 0): report_of()})
        assert rep.metric(HomophilyBin(4, 4), "f1") is None


class TestDesignComparison:
    def test_identical_families_give_zero(self):
        reports = [stratified_of({(1, 1): report_of(f1=0.8, sp=0.3, eo=0.2)})]
        cmp = design_comparison(reports, reports)
        d = cmp.diff[HomophilyBin(1, 1)]
        assert d == {"f1": 0.0, "delta_sp": 0.0, "delta_eo": 0.0}

    def test_signed_difference_arithmetic(self):
        # Heterophilous mean 0.1 vs homophilous 0.3: improvement of -0.2.
        het = [stratified_of({(2, 3): report_of(sp=0.1)})]
        hom = [stratified_of({(2, 3): report_of(sp=0.3)})]
        cmp = design_comparison(het, hom)
        assert cmp.diff[HomophilyBin(2, 3)]["delta_sp"] == pytest.approx(-0.2)

    def test_undefined_entries_skipped_with_counts(self):
        het = [stratified_of({(0, 0): report_of(sp=0.4)}),
               stratified_of({(0, 0): report_of(sp=None)})]
        hom = [stratified_of({(0, 0): report_of(sp=0.2)})]
        cmp = design_comparison(het, hom)
        assert cmp.diff[HomophilyBin(0, 0)]["delta_sp"] == pytest.approx(0.2)
        assert cmp.counts[HomophilyBin(0, 0)]["delta_sp"] == (1, 1)
        assert cmp.counts[HomophilyBin(0, 0)]["f1"] == (2, 1)

    def test_mean_over_runs(self):
        het = [stratified_of({(1, 1): report_of(f1=0.6)}),
               stratified_of({(1, 1): report_of(f1=0.8)})]
        hom = [stratified_of({(1, 1): report_of(f1=0.5)})]
        cmp = design_comparison(het, hom)
        assert cmp.diff[HomophilyBin(1, 1)]["f1"] == pytest.approx(0.2)

    def test_disjoint_bins_rejected(self):
        het = [stratified_of({(0, 0): report_of()})]
        hom = [stratified_of({(4, 4): report_of()})]
        with pytest.raises(ValueError, match="no bin"):
            design_comparison(het, hom)

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError, match="both families"):
            design_comparison([], [stratified_of({(0, 0): report_of()})])

    def test_defined_bins_listing(self):
        het = [stratified_of({(0, 0): report_of(), (3, 3): report_of()})]
        hom = [stratified_of({(0, 0): report_of()})]
        cmp = design_comparison(het, hom)
        assert cmp.defined_bins("f1") == [HomophilyBin(0, 0)]


class TestHighHsSlice:
    def test_strict_threshold_excludes_boundary_and_nan(self):
        prof = profile_of([0.5, 0.7, 0.95, 0.9], [0.6, 0.7, 0.9, np.nan])
        attrs = attrs_of([1, 0, 1, 0], [0, 1, 0, 1])
        out = high_hs_slice(prof, preds_of([1, 0, 1, 0]), attrs, threshold=0.6)
        # Node 0 sits exactly at 0.6 (excluded), node 3 is undefined.
        assert sorted(out) == [3, 4]
        assert out[3][1] == 1 and out[4][1] == 1

    def test_threshold_one_empty_slice_rejected(self):
        prof = profile_of([1.0, 1.0], [1.0, 1.0])
        attrs = attrs_of([1, 0], [0, 1])
        with pytest.raises(ValueError, match="no nodes"):
            high_hs_slice(prof, preds_of([1, 0]), attrs, threshold=1.0)

    def test_slice_metrics_match_direct_calls(self, rng):
        cfg = GeneratorConfig(n_nodes=200, edges_per_node=5, h_c=0.6, h_s=0.8,
                              seed=12)
        g, attrs = generate(cfg)
        prof = homophily_profile(g, attrs.class_labels, attrs.sensitive)
        preds = preds_of(rng.integers(0, 2, size=200))
        out = high_hs_slice(prof, preds, attrs, threshold=0.6)
        sh = prof.values("sens", 1)
        ch = prof.values("class", 1)
        with np.errstate(invalid="ignore"):
            sliced = np.flatnonzero(sh > 0.6)
        assert sum(n for _, n in out.values()) == sliced.size
        for b, (rep, count) in out.items():
            ids = sliced[np.minimum(np.floor(ch[sliced] / 0.2 + 1e-9), 4) == b]
            assert count == ids.size
            direct = fairness_report(preds, attrs.class_labels,
                                     attrs.sensitive, ids)
            assert rep.f1 == direct.f1
            assert rep.delta_sp == direct.delta_sp

    def test_threshold_validation(self):
        prof = profile_of([0.5], [0.5])
        attrs = attrs_of([1], [0])
        with pytest.raises(ValueError, match="threshold"):
            high_hs_slice(prof, preds_of([1]), attrs, threshold=1.5)
