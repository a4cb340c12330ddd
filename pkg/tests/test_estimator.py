import numpy as np
import pytest
from sklearn.base import clone

from vihsd.errors import ConfigError, DataError
from vihsd.estimator import HateSpeechClassifier, TextEncoder, check_labels, check_texts
from vihsd.text import read_dataset

SMALL = dict(max_len=20, embed_dim=16, gru_units=8, lstm_units=8, conv_filters=8,
             learning_rate=0.01, max_epochs=40, early_stopping_patience=40, val_fraction=0.0)


@pytest.fixture(scope="module")
def fixture_data(data_dir):
    return read_dataset(data_dir / "fixture.csv")


@pytest.fixture(scope="module")
def fitted(fixture_data):
    X, y = fixture_data
    return HateSpeechClassifier(**SMALL, lexicon=["dễ thương", "thằng ngu"]).fit(X, y)


def test_check_texts():
    assert check_texts(("a", "b")) == ["a", "b"]
    with pytest.raises(DataError):
        check_texts("just one string")
    with pytest.raises(DataError, match="row 1"):
        check_texts(["a", 3])


def test_check_labels():
    assert check_labels([0.0, 2.0], 2).tolist() == [0, 2]
    with pytest.raises(DataError):
        check_labels([0, 1], 3)
    with pytest.raises(DataError, match="row 1"):
        check_labels([0, 5], 2)
    with pytest.raises(DataError):
        check_labels([0.5], 1)


def test_text_encoder_round_trip():
    enc = TextEncoder(max_len=6, lexicon=["thể thao"]).fit(["Thi đấu thể thao", "vui"])
    ids = enc.transform(["thể thao vui"])
    assert ids.shape == (1, 6)
    assert enc.inverse_transform(ids) == ["thể_thao vui"]
    assert enc.get_params()["max_len"] == 6


def test_params_are_clonable():
    clf = HateSpeechClassifier(kind="textcnn", max_epochs=3)
    twin = clone(clf)
    assert twin.get_params() == clf.get_params()
    assert twin.set_params(max_epochs=5).max_epochs == 5


def test_fit_predict_fixture(fitted, fixture_data):
    X, y = fixture_data
    assert fitted.score(X, y) >= 0.99
    proba = fitted.predict_proba(X[:5])
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_array_equal(fitted.predict(X[:5]), proba.argmax(axis=1))
    assert fitted.classes_.tolist() == [0, 1, 2]
    assert "dễ_thương" in fitted.vocabulary_


def test_save_and_restore(fitted, fixture_data, tmp_path):
    X, _ = fixture_data
    fitted.save(tmp_path / "ck")
    restored = HateSpeechClassifier.from_checkpoint(tmp_path / "ck")
    np.testing.assert_array_equal(restored.predict_proba(X), fitted.predict_proba(X))


def test_validation_split_is_used(fixture_data):
    X, y = fixture_data
    clf = HateSpeechClassifier(**dict(SMALL, val_fraction=0.25, max_epochs=2)).fit(X, y)
    assert len(clf.val_index_) == 16
    assert not set(clf.train_index_) & set(clf.val_index_)


def test_fit_errors():
    with pytest.raises(ConfigError):
        HateSpeechClassifier(**SMALL).fit([], [])
    with pytest.raises(ConfigError):
        HateSpeechClassifier(**dict(SMALL, kind="svm")).fit(["a"], [0])


def test_vectors_are_used(tmp_path):
    path = tmp_path / "v.vec"
    path.write_text("2 4\nvui 1 1 1 1\nbuồn 2 2 2 2\n", encoding="utf-8")
    clf = HateSpeechClassifier(kind="textcnn", max_len=4, embed_dim=4, conv_filters=2,
                               kernel_widths=[2], max_epochs=1, val_fraction=0.0,
                               vectors=str(path))
    clf.fit(["vui quá", "buồn", "ghét"], [0, 1, 2])
    assert clf.embedding_coverage_ == pytest.approx(2 / 4)


def test_vocab_mismatch_on_restore(fitted, tmp_path):
    fitted.save(tmp_path / "ck")
    (tmp_path / "ck" / "vocab.txt").write_text("<pad>\n<unk>\nx\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="vocabulary"):
        HateSpeechClassifier.from_checkpoint(tmp_path / "ck")
