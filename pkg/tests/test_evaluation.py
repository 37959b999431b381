import inspect
import math

import numpy as np
import pytest
from PIL import Image

from mmforesight.evaluation import (
    ABLATION_HEADER,
    EVAL_HEADER,
    AblationRow,
    AblationTable,
    EvalReport,
    FoldMean,
    SsimConfig,
    TrialResult,
    ablate,
    batch_ssim,
    check,
    crossval,
    evaluate,
    expand_subsets,
    norm_relative_error,
    numeric_grad,
    plot_bars,
    plot_curves,
    plot_frames,
    relative_error,
    run_gradcheck,
    split,
    ssim,
)
from mmforesight.exceptions import ConfigError, ContractError
from mmforesight.model import (
    ModalityMask,
    MultimodalPredictor,
    PersistenceBaseline,
    RolloutResult,
    TrainingMeanBaseline,
    save_checkpoint,
)
from mmforesight.sensors import Modality, SampleQuadruple, TrialDataset, compute_stats
from mmforesight.tensor import Tensor, relu
from mmforesight.training import TrainConfig
from mmforesight.utils import read_csv


class Oracle:
    """
    Predicts the ground truth, so every score is perfect
    """

    mask = ModalityMask.vision_only()

    def rollout(self, sample, K, mask=None, teacher_forcing=False, feed_aux=False):
        samples = sample if isinstance(sample, list) else [sample]
        vision = np.stack([s.frames(Modality.VISION) for s in samples])
        T = samples[0].T
        return RolloutResult(
            [Tensor(vision[:, t]) for t in range(K, T)],
            {},
            K,
            T,
            [s.behavior for s in samples],
            [s.trial_id for s in samples],
        )


def moving_square(T=10, size=32, side=8):
    frames = np.zeros((T, 3, size, size), dtype=np.float32)
    for t in range(T):
        frames[t, :, 12 : 12 + side, 4 + t : 4 + t + side] = 1.0
    return SampleQuadruple(
        vision=frames,
        haptic=np.zeros((T, 10, 8), dtype=np.float32),
        audio=np.zeros((T, 32, 8), dtype=np.float32),
        vibro=np.zeros((T, 16, 8), dtype=np.float32),
        behavior="push",
    )


def report_of(*curves, K=4, behavior="push", mse=None):
    trials = [
        TrialResult(index, behavior, K, np.asarray(curve, dtype=float), dict(mse or {}))
        for index, curve in enumerate(curves)
    ]
    return EvalReport(trials)


def test_ssim_of_identical_images_is_one(rng):
    image = rng.uniform(size=(3, 16, 16))
    assert ssim(image, image) == pytest.approx(1.0)


def test_ssim_is_symmetric(rng):
    a = rng.uniform(size=(3, 16, 16))
    b = rng.uniform(size=(3, 16, 16))
    assert ssim(a, b) == pytest.approx(ssim(b, a))
    assert ssim(a, b) < 1.0


def test_ssim_of_constant_images():
    config = SsimConfig.default()
    p, q = 0.2, 0.7
    expected = (2 * p * q + config.c1) / (p * p + q * q + config.c1)
    assert ssim(np.full((12, 12), p), np.full((12, 12), q)) == pytest.approx(expected, rel=1e-6)


def test_ssim_identity_is_exact(rng):
    image = rng.uniform(size=(3, 16, 16))
    assert abs(ssim(image, image) - 1.0) <= 1e-12


def test_ssim_symmetry_is_exact(rng):
    a = rng.uniform(size=(3, 16, 16))
    b = rng.uniform(size=(3, 16, 16))
    assert abs(ssim(a, b) - ssim(b, a)) <= 1e-12


@pytest.mark.parametrize("p, q", [(0.2, 0.7), (0.0, 1.0), (0.5, 0.5)])
def test_ssim_of_constant_images_matches_closed_form(p, q):
    config = SsimConfig.default()
    expected = (2 * p * q + config.c1) / (p * p + q * q + config.c1)
    assert abs(ssim(np.full((3, 12, 12), p), np.full((3, 12, 12), q)) - expected) <= 1e-12


def test_ssim_decreases_with_constant_offset(rng):
    image = rng.uniform(0.0, 0.5, size=(3, 16, 16))
    scores = [ssim(image, image + offset) for offset in (0.0, 0.05, 0.1, 0.2, 0.4)]
    assert scores[0] == pytest.approx(1.0)
    assert all(later < earlier for earlier, later in zip(scores, scores[1:]))


def test_ssim_rejects_mismatched_shapes():
    with pytest.raises(ContractError):
        ssim(np.zeros((8, 8)), np.zeros((9, 8)))
    with pytest.raises(ContractError):
        ssim(np.zeros((4, 4)), np.zeros((4, 4)))
    with pytest.raises(ContractError):
        batch_ssim(np.zeros((2, 3, 8, 8)), np.zeros((3, 3, 8, 8)))


def test_ssim_config_validation():
    with pytest.raises(ConfigError):
        SsimConfig(window=6)
    with pytest.raises(ConfigError):
        SsimConfig(sigma=0.0)
    with pytest.raises(ConfigError):
        SsimConfig(c1=-1.0)
    assert SsimConfig().kernel().sum() == pytest.approx(1.0)
    assert SsimConfig(dynamic_range=255.0).c1 == pytest.approx((0.01 * 255.0) ** 2)


def test_oracle_scores_perfectly(make_sample):
    dataset = TrialDataset([make_sample(T=6, seed=i, trial_id=i) for i in range(3)])
    report = evaluate(Oracle(), dataset, K=2)
    assert report.timesteps == [3, 4, 5, 6]
    np.testing.assert_allclose(report.ssim_curve, 1.0)
    assert report.counts.tolist() == [3, 3, 3, 3]
    assert math.isnan(report.mse(Modality.HAPTIC))
    assert report.mean_ssim() == pytest.approx(1.0)


def test_evaluate_leaves_checkpoint_untouched(tmp_path, make_sample):
    samples = [make_sample(T=5, seed=i, trial_id=i) for i in range(2)]
    model = MultimodalPredictor(mask=ModalityMask.parse("vision+haptic"), seed=4)
    path = save_checkpoint(tmp_path / "model.ckpt", model, compute_stats(samples))
    before = path.read_bytes()
    report = evaluate(path, TrialDataset(samples), K=2)
    assert report.timesteps == [3, 4, 5]
    assert path.read_bytes() == before
    assert sorted(p.name for p in tmp_path.iterdir()) == ["model.ckpt"]


def test_threaded_evaluation_matches_serial(make_sample):
    dataset = TrialDataset([make_sample(T=5, seed=i, trial_id=i) for i in range(5)])
    serial = evaluate(PersistenceBaseline(), dataset, K=2, batch_size=2)
    threaded = evaluate(PersistenceBaseline(), dataset, K=2, batch_size=2, workers=3)
    assert serial.rows() == threaded.rows()
    assert [t.trial_id for t in serial.trials] == [t.trial_id for t in threaded.trials]


def test_persistence_degrades_with_horizon():
    report = evaluate(PersistenceBaseline(), TrialDataset([moving_square()]), K=4)
    curve = report.ssim_curve
    assert report.timesteps == [5, 6, 7, 8, 9, 10]
    assert curve[0] > curve[-1]
    assert np.all(np.diff(curve) <= 1e-12)
    assert curve[0] < 1.0


def test_training_mean_baseline_reports_mse(make_sample):
    train_split = [make_sample(T=6, seed=i) for i in range(3)]
    test_split = TrialDataset([make_sample(T=6, seed=10)])
    report = evaluate(TrainingMeanBaseline(train_split), test_split, K=3)
    for modality in Modality.NON_VISUAL:
        assert np.isfinite(report.mse(modality))
        assert len(report.mse_curve(modality)) == 3


def test_evaluate_rejects_bad_requests(make_sample):
    dataset = TrialDataset([make_sample(T=6)])
    with pytest.raises(ConfigError):
        evaluate(Oracle(), dataset, ModalityMask.all(), K=2)
    with pytest.raises(ConfigError):
        evaluate(Oracle(), dataset, K=6)
    with pytest.raises(ContractError):
        evaluate(Oracle(), TrialDataset([]), K=2)
    with pytest.raises(ContractError):
        evaluate(object(), dataset, K=2)


def test_report_rows_and_csv(tmp_path):
    report = report_of([0.9, 0.8, 0.7], [0.7, 0.6], mse={Modality.HAPTIC: np.array([0.5, 0.5, 0.5])})
    assert report.timesteps == [5, 6, 7]
    np.testing.assert_allclose(report.ssim_curve, [0.8, 0.7, 0.7])
    assert report.counts.tolist() == [2, 2, 1]
    assert report.mean_ssim(6, 7) == pytest.approx((0.8 + 0.7 + 0.6) / 3)

    header, rows = read_csv(report.write_csv(tmp_path / "eval.csv"))
    assert tuple(header) == EVAL_HEADER
    assert [row[0] for row in rows] == ["5", "6", "7"]
    assert rows[0][2] == "0.5"
    assert rows[0][3] == "nan"


def test_report_needs_one_context():
    with pytest.raises(ContractError):
        EvalReport([])
    with pytest.raises(ContractError):
        EvalReport(
            [
                TrialResult(0, "push", 2, np.ones(2), {}),
                TrialResult(1, "push", 3, np.ones(2), {}),
            ]
        )


def test_per_behavior_breakdown():
    trials = [
        TrialResult(0, "push", 4, np.array([1.0, 0.8]), {}),
        TrialResult(1, "drop", 4, np.array([0.4, 0.2]), {}),
        TrialResult(2, "push", 4, np.array([0.6, 0.6]), {}),
    ]
    breakdown = EvalReport(trials).per_behavior()
    assert list(breakdown) == ["drop", "push"]
    assert breakdown["drop"] == pytest.approx(0.3)
    assert breakdown["push"] == pytest.approx(0.75)


def test_fold_mean_weights_every_fold_once():
    many = report_of([1.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    few = report_of([0.0])
    mean = FoldMean([many, few])
    assert mean.mean_ssim() == pytest.approx(0.5)
    np.testing.assert_allclose(mean.ssim_curve, [0.5, 1.0])
    assert mean.timesteps == [5, 6]
    assert len(mean.rows()[0]) == len(EVAL_HEADER)
    with pytest.raises(ContractError):
        FoldMean([])


def object_dataset(make_sample, n_objects, per_object=1, behaviors=("push",), T=2):
    samples = []
    for object_id in range(n_objects):
        for k in range(per_object):
            samples.append(
                make_sample(
                    T=T,
                    object_id=object_id,
                    trial_id=len(samples),
                    behavior=behaviors[k % len(behaviors)],
                    seed=len(samples),
                    size=8,
                )
            )
    return TrialDataset(samples)


def test_crossval_splits_objects_evenly(make_sample):
    dataset = object_dataset(make_sample, 100)
    folds = crossval(dataset, 5, seed=3)
    assert len(folds) == 5
    tests = [set(test) for _, test in folds]
    assert all(len(test) == 20 for test in tests)
    assert set().union(*tests) == set(range(100))
    for train, test in folds:
        assert not set(train) & set(test)
        assert len(train) == 80
    assert sum(len(a & b) for i, a in enumerate(tests) for b in tests[i + 1 :]) == 0
    assert crossval(dataset, 5, seed=3) == folds
    assert crossval(dataset, 5, seed=4) != folds


def test_crossval_split_datasets(make_sample):
    dataset = object_dataset(make_sample, 6, per_object=2)
    fold = crossval(dataset, 3)[0]
    train_set, test_set = split(dataset, fold)
    assert len(train_set) + len(test_set) == len(dataset)
    assert not set(train_set.object_ids()) & set(test_set.object_ids())


def test_crossval_errors(make_sample):
    with pytest.raises(ConfigError):
        crossval(object_dataset(make_sample, 3), 5)
    with pytest.raises(ConfigError):
        crossval(object_dataset(make_sample, 10), 1)


def test_expand_subsets():
    plain = ModalityMask.parse("vision+haptic")
    assert expand_subsets([plain, plain]) == [plain]
    assert expand_subsets([plain], behavior_toggle=True) == [
        plain,
        ModalityMask.parse("vision+haptic+behavior"),
    ]
    assert expand_subsets([plain], aux_toggle=True) == [plain, plain.with_aux(True)]
    assert expand_subsets([ModalityMask.vision_only()], aux_toggle=True) == [
        ModalityMask.vision_only()
    ]


def test_ablation_table_rows_and_aux_comparison(tmp_path):
    haptic_mse = {Modality.HAPTIC: np.array([0.2, 0.2])}
    vision = ModalityMask.vision_only()
    plain = ModalityMask.parse("vision+haptic")
    rows = [
        AblationRow(vision, FoldMean([report_of([0.5, 0.5])])),
        AblationRow(plain, FoldMean([report_of([0.6, 0.6], mse=haptic_mse)])),
        AblationRow(plain.with_aux(True), FoldMean([report_of([0.7, 0.7], mse=haptic_mse)])),
    ]
    table = AblationTable(rows)
    assert len(table) == 3
    assert table[plain.with_aux(True)].ssim == pytest.approx(0.7)
    with pytest.raises(KeyError):
        table[ModalityMask.all()]

    row = table[plain].row()
    assert len(row) == len(ABLATION_HEADER)
    assert row[:6] == ("vision+haptic", 1, 0, 0, 0, 0)

    comparison = table.aux_comparison()
    assert len(comparison) == 2
    assert comparison[0][:3] == ("vision", 0.5, 0.5)
    label, with_aux, without_aux, mse_h, mse_a, mse_v = comparison[1]
    assert (label, with_aux, without_aux) == ("vision+haptic", pytest.approx(0.7), pytest.approx(0.6))
    assert mse_h == pytest.approx(0.2)
    assert math.isnan(mse_a) and math.isnan(mse_v)

    header, written = read_csv(table.write_csv(tmp_path / "ablation.csv"))
    assert tuple(header) == ABLATION_HEADER
    assert len(written) == 3


def test_behavior_groups():
    mask = ModalityMask.parse("vision+audio")
    general = FoldMean(
        [EvalReport([TrialResult(0, "push", 4, np.array([0.5]), {}), TrialResult(1, "drop", 4, np.array([0.7]), {})])]
    )
    specific = {
        "push": FoldMean([report_of([0.9], behavior="push")]),
        "drop": FoldMean([report_of([0.3], behavior="drop")]),
    }
    row = AblationRow(mask, general, specific)
    assert row.averaged == pytest.approx(0.6)
    groups = AblationTable([row]).behavior_groups()
    assert list(groups) == ["drop", "push", "averaged", "general"]
    assert groups["general"]["vision+audio"] == pytest.approx(0.6)
    behavior_rows = row.behavior_rows()
    assert behavior_rows[0] == ("vision+audio", "drop", pytest.approx(0.3), pytest.approx(0.7))


def test_ablate_needs_subsets(make_sample):
    with pytest.raises(ConfigError):
        ablate(object_dataset(make_sample, 4), [])


@pytest.mark.slow
def test_small_ablation_is_worker_independent(make_sample, tmp_path):
    dataset = object_dataset(make_sample, 4, T=4)
    config = TrainConfig(epochs=1, batch_size=4, K=2)
    subsets = [ModalityMask.vision_only()]

    serial = ablate(dataset, subsets, config, k_folds=2, out_dir=tmp_path / "serial")
    threaded = ablate(dataset, subsets, config, k_folds=2, workers=2, out_dir=tmp_path / "threaded")
    assert len(serial) == 1
    assert serial.rows[0].ssim == threaded.rows[0].ssim
    for fold in range(2):
        name = f"vision_fold{fold}.csv"
        assert (tmp_path / "serial" / name).read_bytes() == (tmp_path / "threaded" / name).read_bytes()


def test_plot_curves_and_bars(tmp_path):
    curves = plot_curves(
        {"vision": ([5, 6, 7], [0.9, 0.8, 0.7]), "all": ([5, 6, 7], [0.95, float("nan"), 0.8])},
        tmp_path / "plots" / "curves.png",
    )
    bars = plot_bars(
        {"push": {"vision": 0.8, "all": 0.9}, "averaged": {"vision": float("nan"), "all": 0.85}},
        tmp_path / "bars.png",
    )
    for path in (curves, bars):
        with Image.open(path) as image:
            assert image.mode == "RGB"
    with pytest.raises(ContractError):
        plot_curves({}, tmp_path / "empty.png")


def test_plot_frames_aligns_predictions(tmp_path):
    truth = np.zeros((6, 3, 8, 8))
    predicted = np.full((2, 3, 8, 8), 0.5)
    path = plot_frames(truth, predicted, tmp_path / "frames.png", scale=4, gap=2)
    with Image.open(path) as image:
        assert image.size == (6 * 34, 2 * 34)
        assert image.getpixel((4 * 34 + 1, 34 + 1)) == (128, 128, 128)
        assert image.getpixel((1, 1)) == (0, 0, 0)
        assert image.getpixel((1, 34 + 1)) == (255, 255, 255)
    with pytest.raises(ContractError):
        plot_frames(truth, np.ones((7, 3, 8, 8)), tmp_path / "bad.png")


def test_numeric_grad_of_square():
    x = Tensor(np.array([0.5, -1.0, 2.0]), requires_grad=True, dtype=np.float64)
    numeric = numeric_grad(lambda: (x * x).sum(), x)
    np.testing.assert_allclose(numeric, [1.0, -2.0, 4.0], atol=1e-6)
    assert relative_error(numeric, numeric) == 0.0


def test_check_reports_pass_for_exact_gradients():
    x = Tensor(np.array([[0.3, -0.7], [1.1, 0.2]]), requires_grad=True, dtype=np.float64)
    result = check("square", lambda: (x * x).sum(), [x])
    assert result.passed
    assert "ok" in str(result)


def test_relative_error_reports_worst_entry():
    analytic = np.array([1.0, 2.0, 0.0])
    numeric = np.array([1.0, 2.2, 0.0])
    assert relative_error(analytic, numeric) == pytest.approx(0.2 / 2.2)
    assert norm_relative_error(analytic, numeric) < relative_error(analytic, numeric)
    assert relative_error(np.array([1e-9]), np.array([0.0])) == pytest.approx(1e-3)
    assert relative_error(np.array([1e-9]), np.array([0.0]), floor=1e-3) == pytest.approx(1e-6)


def test_kink_guard_skips_entries_next_to_relu_kink():
    x = Tensor(np.array([0.5, -0.3, 1e-5]), requires_grad=True, dtype=np.float64)
    plain = check("relu", lambda: relu(x).sum(), [x])
    assert not plain.passed
    assert plain.error == pytest.approx(0.45, rel=1e-6)

    guarded = check("relu", lambda: relu(x).sum(), [x], kink_guard=True)
    assert guarded.passed, str(guarded)
    assert guarded.skipped == 1


def test_gradcheck_defaults_to_twenty_seeds():
    assert inspect.signature(run_gradcheck).parameters["pipeline_seeds"].default == 20
    assert inspect.signature(run_gradcheck).parameters["seeds"].default == 20


def test_primitive_gradients():
    results = run_gradcheck(seeds=2, suites=["arithmetic", "conv2d", "conv_transpose2d", "softmax"])
    assert len(results) == 8
    assert all(result.passed for result in results), [str(r) for r in results]


@pytest.mark.slow
def test_pipeline_gradients():
    results = run_gradcheck(pipeline_seeds=1, suites=["pipeline"])
    assert all(result.passed for result in results), [str(r) for r in results]
