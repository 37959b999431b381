import numpy as np
import pytest

from mmforesight.exceptions import ConfigError, ContractError, DivergenceError
from mmforesight.model import ModalityMask, MultimodalPredictor, RolloutResult, load_checkpoint
from mmforesight.sensors import Modality, TrialDataset
from mmforesight.tensor import Parameter, Tensor, default_dtype
from mmforesight.training import (
    LOSS_HEADER,
    Adam,
    AdamState,
    BatchPrefetcher,
    HandlerList,
    LossWeights,
    RegisteredListener,
    TrainConfig,
    Trainer,
    adam_step,
    clip_by_global_norm,
    global_norm,
    loss_terms,
    total_loss,
    train,
    weighted_sum,
)
from mmforesight.utils import read_csv


def truth_rollout(sample, K):
    frames = {m: sample.frames(m) for m in Modality.ALL}
    return RolloutResult(
        [Tensor(frames[Modality.VISION][t][None]) for t in range(K, sample.T)],
        {m: [Tensor(frames[m][t][None]) for t in range(K, sample.T)] for m in Modality.NON_VISUAL},
        K,
        sample.T,
        [sample.behavior],
        [sample.trial_id],
    )


def unit_terms():
    return {m: Tensor(np.array(1.0)) for m in Modality.ALL}


def test_perfect_predictions_have_zero_loss(make_sample):
    sample = make_sample(T=6)
    terms = loss_terms(truth_rollout(sample, 2), sample)
    assert set(terms) == set(Modality.ALL)
    for term in terms.values():
        assert term.item() == 0.0
    assert total_loss(truth_rollout(sample, 2), sample, LossWeights()).item() == 0.0


def test_weighted_sum_of_unit_terms():
    assert weighted_sum(unit_terms(), LossWeights()).item() == pytest.approx(1.0 + 1e-4 + 1e-3 + 1e-4)


def test_vision_only_weights():
    weights = LossWeights().for_mask(ModalityMask.vision_only())
    terms = unit_terms()
    terms[Modality.VISION] = Tensor(np.array(0.37))
    assert weighted_sum(terms, weights).item() == pytest.approx(0.37)

    aux = LossWeights().for_mask(ModalityMask.parse("vision+audio", aux_training=True))
    assert (aux[Modality.HAPTIC], aux[Modality.AUDIO], aux[Modality.VIBRO]) == (0.0, 1e-3, 0.0)


def test_loss_weights_validation():
    with pytest.raises(ConfigError):
        LossWeights(vision=0.0)
    with pytest.raises(ConfigError):
        LossWeights(haptic=-1.0)


def test_loss_terms_misaligned(make_sample):
    sample = make_sample(T=6)
    with pytest.raises(ContractError):
        loss_terms(truth_rollout(sample, 2), make_sample(T=7))
    with pytest.raises(ContractError):
        loss_terms(truth_rollout(sample, 2), make_sample(T=6, trial_id=9))


def test_adam_zero_grad_keeps_params():
    param = Parameter(np.array([1.0, -2.0]))
    state = adam_step([param], [np.zeros(2)], AdamState([param]))
    np.testing.assert_array_equal(param.data, [1.0, -2.0])
    assert state.step == 1


def test_adam_first_step_moves_by_lr():
    param = Parameter(np.array([0.5]), dtype=np.float64)
    adam_step([param], [np.array([3.0])], AdamState([param]), lr=1e-3)
    assert param.data[0] == pytest.approx(0.5 - 1e-3, abs=1e-9)


def test_adam_missing_grad():
    param = Parameter(np.zeros(2))
    with pytest.raises(ContractError):
        adam_step([param], [None], AdamState([param]))


def test_adam_treats_unreached_params_as_zero():
    used = Parameter(np.array([1.0]), dtype=np.float64)
    unused = Parameter(np.array([2.0]), dtype=np.float64)
    optimizer = Adam([used, unused], lr=0.1)
    (Tensor(np.array([1.0])) * used).sum().backward()
    optimizer.step()
    assert unused.data[0] == 2.0
    assert used.data[0] == pytest.approx(0.9)


def test_clip_by_global_norm():
    grads = [np.array([3.0]), np.array([4.0])]
    assert global_norm(grads) == pytest.approx(5.0)
    clipped = clip_by_global_norm(grads, 1.0)
    assert global_norm(clipped) == pytest.approx(1.0)
    assert clip_by_global_norm(grads, 10.0)[0] is grads[0]


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(lr=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(teacher_forcing="sometimes")
    with pytest.raises(ConfigError):
        TrainConfig(K=0)


def test_linear_forcing_schedule():
    config = TrainConfig(epochs=3, teacher_forcing="linear")
    assert [config.forcing_ratio(e) for e in range(3)] == [1.0, 0.5, 0.0]
    assert TrainConfig(teacher_forcing=False).forcing_ratio(0) is False
    assert config.replace(epochs=5).epochs == 5
    assert config.echo()["train.teacher_forcing"] == "linear"


def test_handler_list_fires_in_order():
    handlers = HandlerList()
    seen = []
    first = RegisteredListener("epoch_end", lambda event: seen.append(("a", event)))
    second = RegisteredListener("epoch_end", lambda event: seen.append(("b", event)))
    handlers.register(first)
    handlers.register(second)
    handlers.register(first)
    handlers.fire("epoch_end", 1)
    handlers.unregister(first)
    handlers.fire("epoch_end", 2)
    handlers.fire("batch_end", 3)
    assert seen == [("a", 1), ("b", 1), ("b", 2)]


@pytest.mark.parametrize("workers", [0, 1])
def test_prefetcher_preserves_order(workers):
    out = list(BatchPrefetcher(range(10), lambda b: b * 2, workers=workers, depth=2))
    assert out == [2 * i for i in range(10)]


def test_prefetcher_reraises():
    def prepare(batch):
        if batch == 3:
            raise ValueError("broken batch")
        return batch

    with pytest.raises(ValueError):
        list(BatchPrefetcher(range(5), prepare, workers=1))


def test_batches_group_by_length(make_sample):
    samples = [make_sample(T=6, trial_id=i, seed=i) for i in range(5)]
    samples += [make_sample(T=4, trial_id=5 + i, seed=5 + i) for i in range(2)]
    trainer = Trainer(TrialDataset(samples), TrainConfig(batch_size=2, K=2))
    batches = trainer.batches(0)
    assert len(batches) == 4
    assert sorted(s.trial_id for b in batches for s in b) == list(range(7))
    for batch in batches:
        assert len({s.T for s in batch}) == 1
    assert [[s.trial_id for s in b] for b in trainer.batches(0)] == [
        [s.trial_id for s in b] for b in batches
    ]


def test_trainer_rejects_short_trials(make_sample):
    with pytest.raises(ConfigError):
        train(TrialDataset([make_sample(T=3)]), TrainConfig(K=3))
    with pytest.raises(ContractError):
        train(TrialDataset([]), TrainConfig())


def tiny_dataset(make_sample, n=2, T=4):
    return TrialDataset([make_sample(T=T, seed=i, trial_id=i, object_id=i) for i in range(n)])


def test_training_is_reproducible(tmp_path, make_sample):
    config = TrainConfig(epochs=2, batch_size=2, K=2, seed=7)
    a = train(tiny_dataset(make_sample), config, tmp_path / "a.ckpt", tmp_path / "a.csv")
    b = train(tiny_dataset(make_sample), config, tmp_path / "b.ckpt", tmp_path / "b.csv")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert a.log == b.log

    header, rows = read_csv(tmp_path / "a.csv")
    assert tuple(header) == LOSS_HEADER
    assert len(rows) == 2
    assert load_checkpoint(tmp_path / "a.ckpt").header["train.epochs"] == "2"


def test_training_fires_events(make_sample):
    trainer = Trainer(tiny_dataset(make_sample, n=3), TrainConfig(epochs=2, batch_size=2, K=2))
    epochs, batches = [], []
    trainer.on_epoch_end(epochs.append)
    trainer.on_batch_end(batches.append)
    result = trainer.train()
    assert [event.epoch for event in epochs] == [0, 1]
    assert [event.batches for event in epochs] == [2, 2]
    assert len(batches) == 4
    assert all(np.isfinite(event.grad_norm) for event in batches)
    assert result.epoch_losses() == pytest.approx([event.loss for event in epochs])


def test_aux_terms_are_logged(make_sample):
    config = TrainConfig(epochs=1, batch_size=2, K=2, mask=ModalityMask.parse("vision+haptic", aux_training=True))
    result = train(tiny_dataset(make_sample), config)
    epoch, batch, total, vision, haptic, audio, vibro = result.log[0]
    assert haptic > 0.0
    assert audio == 0.0 and vibro == 0.0
    assert total == pytest.approx(vision + 1e-4 * haptic, rel=1e-5)


def test_divergence_keeps_last_checkpoint(tmp_path, make_sample):
    trainer = Trainer(tiny_dataset(make_sample), TrainConfig(epochs=3, batch_size=2, K=2))
    path = tmp_path / "model.ckpt"
    saved = {}

    def poison(event):
        if event.epoch == 0:
            saved["bytes"] = path.read_bytes()
            broken = [
                s.replace(vision=np.full_like(s.vision, np.nan)) for s in trainer.dataset
            ]
            trainer.dataset = TrialDataset(broken, trainer.dataset.config)

    trainer.on_epoch_end(poison)
    with pytest.raises(DivergenceError):
        trainer.train(path, tmp_path / "loss.csv")
    assert path.read_bytes() == saved["bytes"]
    _, rows = read_csv(tmp_path / "loss.csv")
    assert len(rows) == 1


def test_non_finite_parameters_keep_last_checkpoint(tmp_path, make_sample, monkeypatch):
    from mmforesight.training import optimizer

    original = optimizer.adam_step

    def poisoned(params, grads, state, *args):
        state = original(params, grads, state, *args)
        if state.step == 2:
            params[0].data[...] = np.inf
        return state

    monkeypatch.setattr(optimizer, "adam_step", poisoned)
    trainer = Trainer(tiny_dataset(make_sample), TrainConfig(epochs=3, batch_size=2, K=2))
    path = tmp_path / "model.ckpt"
    saved = {}
    trainer.on_epoch_end(lambda event: saved.setdefault("bytes", path.read_bytes()))
    with pytest.raises(DivergenceError):
        trainer.train(path, tmp_path / "loss.csv")
    assert path.read_bytes() == saved["bytes"]
    assert all(np.all(np.isfinite(block)) for block in load_checkpoint(path).model.state_dict().values())
    _, rows = read_csv(tmp_path / "loss.csv")
    assert len(rows) == 2


@pytest.mark.slow
def test_overfits_small_set(make_sample):
    dataset = tiny_dataset(make_sample, n=4, T=6)
    result = train(dataset, TrainConfig(epochs=200, batch_size=4, K=2, lr=1e-3))
    vision = [row[3] for row in result.log]
    assert vision[-1] <= vision[0] / 10


def test_adam_minimizes_shifted_square():
    x = Parameter(np.array([0.0]), dtype=np.float64)
    optimizer = Adam([x], lr=0.1, clip_norm=None)
    for _ in range(500):
        optimizer.zero_grad()
        ((x - 3.0) * (x - 3.0)).sum().backward()
        optimizer.step()
    assert abs(x.data[0] - 3.0) < 1e-2


def decoder_grads(model, sample, weights):
    model.zero_grad()
    total_loss(model.rollout(sample, 2), sample, weights.for_mask(model.mask)).backward()
    return {name: param.grad for name, param in model.named_parameters() if name.startswith("decoders.")}


def test_zero_weight_leaves_aux_head_without_gradient(make_sample):
    sample = make_sample(T=4)
    with default_dtype(np.float64):
        model = MultimodalPredictor(mask=ModalityMask.parse("vision+haptic+audio", aux_training=True), seed=1)
    grads = decoder_grads(model, sample, LossWeights(audio=0.0))
    assert any(name.startswith("decoders.audio.") for name in grads)
    for name, grad in grads.items():
        if name.startswith("decoders.audio."):
            assert grad is None or not np.any(grad), name
        else:
            assert grad is not None, name


def test_aux_weight_scales_head_gradients(make_sample):
    sample = make_sample(T=4)
    with default_dtype(np.float64):
        model = MultimodalPredictor(mask=ModalityMask.parse("vision+haptic+audio", aux_training=True), seed=1)
    base = decoder_grads(model, sample, LossWeights(haptic=1e-4))
    scaled = decoder_grads(model, sample, LossWeights(haptic=3e-4))
    for name in base:
        if name.startswith("decoders.haptic."):
            np.testing.assert_allclose(scaled[name], 3.0 * base[name], rtol=1e-9, atol=1e-300, err_msg=name)
        else:
            np.testing.assert_allclose(scaled[name], base[name], rtol=1e-12, err_msg=name)
