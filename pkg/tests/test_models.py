import numpy as np
import pytest

from vihsd.embeddings import random_embedding_table
from vihsd.errors import ConfigError, DimensionError
from vihsd.models import KINDS, ModelSpec, build_model, param_count, predict
from vihsd.rng import make_rng
from vihsd.verify import check_model


def _build(kind, vocab=20, **overrides):
    spec = ModelSpec(kind=kind, **overrides)
    return build_model(spec, random_embedding_table(vocab, spec.embed_dim, make_rng(0)), make_rng(1))


def _small(kind, **overrides):
    params = dict(max_len=8, embed_dim=6, gru_units=4, lstm_units=3, conv_filters=5)
    params.update(overrides)
    if kind == "textcnn":
        params.setdefault("kernel_widths", (2, 3))
    return _build(kind, **params)


def test_full_size_stage_widths():
    model = _build("bigru-lstm-cnn", vocab=5)
    assert model.bigru.output_dim == 224
    assert model.lstm_output_dim == 448
    assert model.conv_3.kernel.shape == (64, 3, 448)


def test_textcnn_concat_width():
    model = _build("textcnn", vocab=5)
    assert model.head.weight.shape == (300, 3)


def test_head_parameter_count():
    model = _small("bigru-cnn", conv_filters=4)
    assert model.head.weight.size + model.head.bias.size == 15


@pytest.mark.parametrize("kind", KINDS)
def test_freezing_embeddings_changes_trainable_count(kind):
    vocab = 30
    trainable = _build(kind, vocab=vocab)
    frozen = _build(kind, vocab=vocab, embeddings_trainable=False)
    assert param_count(trainable) == param_count(frozen)
    diff = param_count(trainable, trainable_only=True) - param_count(frozen, trainable_only=True)
    assert diff == vocab * 300 - 300


def test_uniform_logits_tie_to_label_zero():
    model = _small("bigru-lstm-cnn")
    model.head.weight.data[:] = 0
    model.head.bias.data[:] = 0
    labels, probs = predict(model, np.ones((2, 8), dtype=np.int64))
    np.testing.assert_allclose(probs, 1 / 3)
    assert labels.tolist() == [0, 0]


@pytest.mark.parametrize("kind", KINDS)
def test_forward_is_batch_permutation_equivariant(kind):
    model = _small(kind)
    ids = np.random.default_rng(2).integers(0, 20, size=(5, 8))
    perm = np.array([3, 0, 4, 1, 2])
    out = model(ids).data
    np.testing.assert_allclose(model(ids[perm]).data, out[perm], atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_probabilities_sum_to_one(kind):
    model = _small(kind)
    _, probs = predict(model, np.random.default_rng(3).integers(0, 20, size=(7, 8)), batch_size=3)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_end_to_end_gradient_check(kind):
    assert check_model(kind, make_rng(0)) < 1e-4


def test_forward_checks_input_shape():
    model = _small("textcnn")
    with pytest.raises(DimensionError):
        model(np.zeros((2, 9), dtype=np.int64))


def test_training_mode_uses_dropout_rng():
    model = _small("bigru-cnn")
    ids = np.ones((2, 8), dtype=np.int64)
    a = model(ids, training=True, rng=make_rng(1)).data
    b = model(ids, training=True, rng=make_rng(1)).data
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(model(ids).data, model(ids).data)


def test_spec_defaults_and_validation():
    assert ModelSpec(kind="textcnn").kernel_widths == (3, 4, 5)
    assert ModelSpec().conv_filters == 64
    with pytest.raises(ConfigError):
        ModelSpec(kind="rnn")
    with pytest.raises(ConfigError):
        ModelSpec(max_len=2, kernel_widths=(3,))
    with pytest.raises(ConfigError):
        ModelSpec(kernel_widths=(3, 3))
    with pytest.raises(ConfigError):
        ModelSpec(dropout_rate=1.0)
    with pytest.raises(ConfigError):
        ModelSpec.from_dict({"kind": "textcnn", "hidden": 3})
    spec = ModelSpec(kind="textcnn", vocab_size=10)
    assert ModelSpec.from_dict(spec.to_dict()) == spec


def test_build_checks_embedding_table():
    spec = ModelSpec(kind="textcnn", embed_dim=8, max_len=10)
    with pytest.raises(ConfigError):
        build_model(spec, random_embedding_table(5, 4, 0))
    spec = ModelSpec(kind="textcnn", embed_dim=4, max_len=10, vocab_size=6)
    with pytest.raises(ConfigError):
        build_model(spec, random_embedding_table(5, 4, 0))
