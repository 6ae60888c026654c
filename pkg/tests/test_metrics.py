import numpy as np
import pytest

from convexlda import (
    ConvexLdaParams,
    NumericError,
    OptimizerConfig,
    ValidationError,
    accuracy,
    class_scatter,
    directed_hausdorff,
    fit,
    fit_method,
    knn_predict,
    loo_knn_accuracy,
    mean_set_distance,
    run_protocol,
    sweep_lambda,
    transform,
    tune_lambda,
)
from convexlda import metrics as metrics_mod
from convexlda.metrics import EvalReport

from conftest import random_dataset, toy_dataset
from oracles import (
    brute_class_scatter,
    brute_directed_hausdorff,
    brute_knn,
    brute_mean_set_distance,
)


class TestKnnPredict:
    def test_exact_match_wins_k1(self, rng):
        train = rng.standard_normal((2, 6))
        labels = np.array([0, 1, 2, 0, 1, 2])
        pred = knn_predict(train, labels, train[:, 3:4], k=1)
        assert pred.tolist() == [0]

    def test_majority_vote(self):
        train = np.array([[0.0, 0.1, 5.0]])
        labels = np.array([0, 0, 1])
        pred = knn_predict(train, labels, np.array([[0.05]]), k=3)
        assert pred.tolist() == [0]

    def test_distance_tie_prefers_lower_index(self):
        # both train points sit exactly 1.0 from the query
        train = np.array([[0.0, 2.0]])
        labels = np.array([1, 0])
        pred = knn_predict(train, labels, np.array([[1.0]]), k=1)
        assert pred.tolist() == [1]

    def test_vote_tie_prefers_smaller_label(self):
        train = np.array([[0.0, 1.0]])
        labels = np.array([2, 0])
        pred = knn_predict(train, labels, np.array([[0.4]]), k=2)
        assert pred.tolist() == [0]

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            train = np.round(rng.standard_normal((2, 12)), 1)
            test = np.round(rng.standard_normal((2, 5)), 1)
            labels = rng.integers(0, 3, 12)
            k = int(rng.integers(1, 6))
            assert np.array_equal(
                knn_predict(train, labels, test, k), brute_knn(train, labels, test, k)
            )

    def test_k_bounds(self, rng):
        train = rng.standard_normal((2, 4))
        labels = np.array([0, 1, 0, 1])
        with pytest.raises(ValidationError):
            knn_predict(train, labels, train, k=0)
        with pytest.raises(ValidationError):
            knn_predict(train, labels, train, k=5)

    def test_label_count_checked(self, rng):
        with pytest.raises(ValidationError):
            knn_predict(rng.standard_normal((2, 4)), np.array([0, 1]),
                        rng.standard_normal((2, 1)), k=1)


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0

    def test_all_wrong(self):
        assert accuracy([1, 1], [0, 0]) == 0.0

    def test_three_of_four(self):
        assert accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            accuracy([1, 2], [1, 2, 3])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            accuracy([], [])


class TestLooKnnAccuracy:
    def test_two_tight_clusters(self):
        Z = np.array([[0.0, 0.1, 5.0, 5.1]])
        assert loo_knn_accuracy(Z, [0, 0, 1, 1], k=1) == 1.0

    def test_self_is_excluded(self):
        # nearest OTHER point always belongs to the opposite class
        Z = np.array([[0.0, 0.1, 0.2, 0.3]])
        assert loo_knn_accuracy(Z, [0, 1, 0, 1], k=1) == 0.0

    def test_k_bounds(self):
        Z = np.array([[0.0, 1.0]])
        with pytest.raises(ValidationError):
            loo_knn_accuracy(Z, [0, 1], k=2)


class TestDirectedHausdorff:
    def test_subset_gives_zero(self, rng):
        S2 = rng.standard_normal((3, 8))
        S1 = S2[:, [1, 4, 6]]
        assert directed_hausdorff(S1, S2) == 0.0

    def test_single_pair(self):
        S1 = np.array([[0.0], [0.0]])
        S2 = np.array([[3.0], [4.0]])
        assert directed_hausdorff(S1, S2) == 5.0

    def test_asymmetric(self):
        S1 = np.array([[0.0]])
        S2 = np.array([[0.0, 10.0]])
        assert directed_hausdorff(S1, S2) == 0.0
        assert directed_hausdorff(S2, S1) == 10.0

    def test_self_distance_zero(self, rng):
        S = rng.standard_normal((2, 9))
        assert directed_hausdorff(S, S) == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            S1 = np.round(rng.standard_normal((3, 7)), 1)
            S2 = np.round(rng.standard_normal((3, 9)), 1)
            assert directed_hausdorff(S1, S2) == brute_directed_hausdorff(S1, S2)

    def test_bounded_by_max_pairwise(self, rng):
        S1 = rng.standard_normal((2, 6))
        S2 = rng.standard_normal((2, 5))
        most = max(
            np.linalg.norm(S1[:, i] - S2[:, j]) for i in range(6) for j in range(5)
        )
        assert directed_hausdorff(S1, S2) <= most + 1e-12

    def test_symmetric_max_triangle_inequality(self, rng):
        def h(a, b):
            return max(directed_hausdorff(a, b), directed_hausdorff(b, a))

        for _ in range(20):
            A = rng.standard_normal((2, int(rng.integers(1, 6))))
            B = rng.standard_normal((2, int(rng.integers(1, 6))))
            C = rng.standard_normal((2, int(rng.integers(1, 6))))
            assert h(A, C) <= h(A, B) + h(B, C) + 1e-12


class TestClassScatter:
    def test_singleton_is_zero(self):
        assert class_scatter(np.array([[3.0], [4.0]])) == 0.0

    def test_symmetric_pair(self):
        assert class_scatter(np.array([[-1.0, 1.0]])) == 1.0

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            Z = rng.standard_normal((2, 10))
            assert class_scatter(Z) == brute_class_scatter(Z)

    def test_translation_invariant(self, rng):
        Z = rng.standard_normal((3, 12))
        shifted = Z + rng.standard_normal((3, 1))
        assert class_scatter(shifted) == pytest.approx(class_scatter(Z), rel=1e-9)

    def test_scales_linearly(self, rng):
        Z = rng.standard_normal((3, 12))
        assert class_scatter(3.0 * Z) == pytest.approx(3.0 * class_scatter(Z), rel=1e-12)


class TestMeanSetDistance:
    def test_two_singletons(self):
        Zi = np.array([[0.0], [0.0]])
        Zj = np.array([[3.0], [4.0]])
        assert mean_set_distance(Zi, Zj) == 5.0

    def test_self_pairing_enumeration(self):
        S = np.array([[-1.0, 1.0]])
        # pairs: (0, 2, 2, 0) -> mean 1
        assert mean_set_distance(S, S) == 1.0

    def test_matches_loop_oracle_and_symmetry(self, rng):
        for _ in range(20):
            Zi = np.round(rng.standard_normal((3, 6)), 1)
            Zj = np.round(rng.standard_normal((3, 8)), 1)
            want = brute_mean_set_distance(Zi, Zj)
            assert mean_set_distance(Zi, Zj) == want
            assert mean_set_distance(Zj, Zi) == want


class TestEvalReport:
    def test_moments_recomputable(self, rng):
        ds = random_dataset(rng, d=6, M=2, n=30)
        report = run_protocol(ds, "convexlda", 2, 0.7, 1, repeats=5, base_seed=0)
        accs = sorted(report.per_repeat_accuracy)
        import statistics

        assert abs(report.mean_accuracy - statistics.fmean(accs)) <= 1e-12
        assert abs(report.std_accuracy - statistics.stdev(accs)) <= 1e-12
        assert all(0.0 <= a <= 1.0 for a in report.per_repeat_accuracy)

    def test_to_dict_round_trips_fields(self):
        rep = EvalReport(
            protocol={"k": 1}, per_repeat_accuracy=[1.0], mean_accuracy=1.0,
            std_accuracy=0.0, seeds=[0],
        )
        doc = rep.to_dict()
        assert doc["protocol"] == {"k": 1}
        assert doc["failed_repeats"] == [] and doc["partial"] is False


class TestRunProtocol:
    def test_separable_data_scores_one(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=40, spread=0.01)
        report = run_protocol(ds, "convexlda", 1, 0.8, 1, repeats=1, base_seed=0)
        assert report.per_repeat_accuracy == [1.0]

    def test_deterministic(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=30)
        r1 = run_protocol(ds, "convexlda", 2, 0.7, 3, repeats=3, base_seed=5)
        r2 = run_protocol(ds, "convexlda", 2, 0.7, 3, repeats=3, base_seed=5)
        assert r1.to_dict() == r2.to_dict()

    def test_repeats_equal_single_repeat_runs(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=30)
        multi = run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=3, base_seed=10)
        singles = [
            run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=1, base_seed=10 + r)
            .per_repeat_accuracy[0]
            for r in range(3)
        ]
        assert multi.per_repeat_accuracy == singles
        assert multi.seeds == [10, 11, 12]

    def test_threads_do_not_change_output(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=30)
        r1 = run_protocol(ds, "convexlda", 2, 0.7, 1, repeats=4, base_seed=2, threads=1)
        r3 = run_protocol(ds, "convexlda", 2, 0.7, 1, repeats=4, base_seed=2, threads=3)
        assert r1.to_dict() == r3.to_dict()

    def test_fisher_method(self, rng):
        ds = random_dataset(rng, d=5, M=3, n=45, spread=0.05)
        report = run_protocol(ds, "fisher_lda", 2, 0.7, 1, repeats=2, base_seed=0)
        assert report.mean_accuracy == 1.0
        assert report.protocol["ridge"] is None and report.protocol["lambda"] is None

    def test_pca_prereduction(self, rng):
        ds = random_dataset(rng, d=12, M=2, n=30, spread=0.05)
        report = run_protocol(
            ds, "convexlda", 1, 0.7, 1, repeats=2, base_seed=0, pca_variance=0.98
        )
        assert report.protocol["pca_variance"] == 0.98
        assert len(report.per_repeat_accuracy) == 2

    def test_partial_failures_recorded(self, rng, monkeypatch):
        ds = random_dataset(rng, d=5, M=2, n=30)
        real = metrics_mod.fit_method

        def flaky(train, method, p, seed, **kw):
            if seed % 2 == 1:
                raise NumericError("synthetic failure")
            return real(train, method, p, seed, **kw)

        monkeypatch.setattr(metrics_mod, "fit_method", flaky)
        report = run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=4, base_seed=0)
        assert report.failed_repeats == [1, 3]
        assert report.partial is True
        assert len(report.per_repeat_accuracy) == 2

    def test_all_failures_raise(self, rng, monkeypatch):
        ds = random_dataset(rng, d=5, M=2, n=30)

        def doomed(*a, **k):
            raise NumericError("synthetic failure")

        monkeypatch.setattr(metrics_mod, "fit_method", doomed)
        with pytest.raises(NumericError, match="all 3 repeats failed"):
            run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=3, base_seed=0)

    def test_unknown_method(self, rng):
        ds = random_dataset(rng, d=4, M=2, n=20)
        with pytest.raises(ValidationError, match="unknown method"):
            fit_method(ds, "tsne", 2, 0)

    def test_argument_validation(self, rng):
        ds = random_dataset(rng, d=4, M=2, n=20)
        with pytest.raises(ValidationError):
            run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=0, base_seed=0)
        with pytest.raises(ValidationError):
            run_protocol(ds, "convexlda", 1, 0.7, 1, repeats=1, base_seed=0, threads=0)


class TestTuneLambda:
    def test_single_value_grid(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=40)
        opt = OptimizerConfig(max_iters=100)
        best, curve = tune_lambda(ds, 1, folds=2, k_nn=1, log_grid=(2.5,), opt=opt)
        assert best == 2.5
        assert len(curve) == 1 and curve[0]["lambda"] == 2.5

    def test_ties_prefer_smaller_lambda(self, rng):
        # trivially separable: every lambda scores CV accuracy 1.0
        ds = random_dataset(rng, d=5, M=2, n=40, spread=0.01)
        opt = OptimizerConfig(max_iters=100)
        best, curve = tune_lambda(
            ds, 1, folds=2, k_nn=1, log_grid=(0.5, 5.0), refine_steps=3, opt=opt
        )
        assert best == 0.5
        assert all(c["cv_accuracy"] == 1.0 for c in curve)

    def test_prefers_large_lambda_on_noisy_toy(self):
        ds = toy_dataset(class_std=100.0, seed=7)
        best, curve = tune_lambda(
            ds, 2, folds=5, k_nn=1, log_grid=(1.0, 1000.0), refine_steps=4,
            seed=0, opt=OptimizerConfig(max_iters=400),
        )
        assert best == 1000.0

    def test_curve_is_sorted_and_deduplicated(self, rng):
        ds = random_dataset(rng, d=4, M=2, n=30)
        opt = OptimizerConfig(max_iters=50)
        best, curve = tune_lambda(
            ds, 1, folds=2, k_nn=1, log_grid=(0.1, 1.0, 10.0), refine_steps=5, opt=opt
        )
        lams = [c["lambda"] for c in curve]
        assert lams == sorted(lams)
        assert len(set(lams)) == len(lams)

    def test_grid_validation(self, rng):
        ds = random_dataset(rng, d=4, M=2, n=30)
        with pytest.raises(ValidationError):
            tune_lambda(ds, 1, 2, 1, log_grid=())
        with pytest.raises(ValidationError):
            tune_lambda(ds, 1, 2, 1, log_grid=(1.0, 1.0))
        with pytest.raises(ValidationError):
            tune_lambda(ds, 1, 2, 1, log_grid=(-1.0, 1.0))
        with pytest.raises(ValidationError):
            tune_lambda(ds, 1, 2, 1, log_grid=(1.0,), refine_steps=-1)


class TestSweepLambda:
    def test_single_lambda_consistent_with_direct_fit(self, rng):
        ds = random_dataset(rng, d=6, M=3, n=30)
        report = sweep_lambda(ds, 2, [1.0])
        entry = report.entries[0]
        model = fit(ds, ConvexLdaParams(p=2, lambda_=1.0), OptimizerConfig())
        assert entry["L1"] == model.diagnostics["L1"]
        assert entry["L2"] == model.diagnostics["L2"]
        assert entry["final_cost"] == model.diagnostics["final_cost"]

    def test_entry_layout(self, rng):
        ds = random_dataset(rng, d=6, M=3, n=30)
        report = sweep_lambda(ds, 2, [0.5, 5.0], opt=OptimizerConfig(max_iters=100))
        assert report.lambdas == [0.5, 5.0]
        entry = report.entries[0]
        assert len(entry["class_scatter"]) == 3
        assert len(entry["mean_set_distance"]) == 3  # unordered pairs
        assert len(entry["directed_hausdorff"]) == 6  # ordered pairs
        assert len(entry["symmetric_hausdorff"]) == 3
        for key, value in entry["symmetric_hausdorff"].items():
            a, b = key.split("|")
            assert value == max(
                entry["directed_hausdorff"][f"{a}->{b}"],
                entry["directed_hausdorff"][f"{b}->{a}"],
            )

    def test_scatter_grows_with_lambda(self, rng):
        ds = random_dataset(rng, d=20, M=3, n=60, spread=1.0)
        report = sweep_lambda(ds, 2, [0.1, 100.0])
        lo, hi = report.entries
        mean_cs = lambda e: np.mean(list(e["class_scatter"].values()))
        mean_msd = lambda e: np.mean(list(e["mean_set_distance"].values()))
        assert mean_cs(hi) > mean_cs(lo)
        assert mean_msd(hi) > mean_msd(lo)
        assert hi["L1"] > lo["L1"]
        assert hi["L2"] < lo["L2"]

    def test_failed_lambda_keeps_slot(self, rng, monkeypatch):
        ds = random_dataset(rng, d=5, M=2, n=20)
        real = metrics_mod.fit

        def flaky(ds_, params, opt=None):
            if params.lambda_ < 1.0:
                raise NumericError("synthetic failure")
            return real(ds_, params, opt)

        monkeypatch.setattr(metrics_mod, "fit", flaky)
        report = sweep_lambda(ds, 1, [0.5, 2.0], opt=OptimizerConfig(max_iters=50))
        assert report.entries[0]["failed"] is True
        assert "synthetic failure" in report.entries[0]["error"]
        assert report.entries[1]["failed"] is False

    def test_csv_rows_flatten_everything(self, rng):
        ds = random_dataset(rng, d=5, M=2, n=20)
        report = sweep_lambda(ds, 1, [1.0], opt=OptimizerConfig(max_iters=50))
        rows = report.csv_rows()
        metrics_seen = {row[1] for row in rows}
        assert metrics_seen == {
            "L1", "L2", "class_scatter", "mean_set_distance",
            "directed_hausdorff", "symmetric_hausdorff",
        }
        # 2 cost rows + 2 CS + 1 MSD + 2 directed + 1 symmetric
        assert len(rows) == 8

    def test_lambda_validation(self, rng):
        ds = random_dataset(rng, d=4, M=2, n=20)
        with pytest.raises(ValidationError):
            sweep_lambda(ds, 1, [])
        with pytest.raises(ValidationError):
            sweep_lambda(ds, 1, [2.0, 1.0])
