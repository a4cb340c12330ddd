import logging

import numpy as np
import pytest

from vihsd.embeddings import (
    OOV_INIT_RANGE,
    VecFile,
    build_embedding_matrix,
    parse_vec_file,
    random_embedding_table,
    write_vec_file,
)
from vihsd.errors import ConfigError, FormatError
from vihsd.text import Vocabulary


def _write(tmp_path, text, name="v.vec"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_simple_file(tmp_path):
    vec = parse_vec_file(_write(tmp_path, "2 3\na 1 2 3\nb 4 5 6\n"))
    assert (vec.vocab_count, vec.dim, len(vec)) == (2, 3, 2)
    np.testing.assert_array_equal(vec["b"], [4, 5, 6])


def test_short_row_reports_line(tmp_path):
    with pytest.raises(FormatError, match="line 2"):
        parse_vec_file(_write(tmp_path, "1 3\na 1 2\n"))


def test_bad_header_and_values(tmp_path):
    with pytest.raises(FormatError, match="line 1"):
        parse_vec_file(_write(tmp_path, "hello\na 1\n"))
    with pytest.raises(FormatError, match="line 3"):
        parse_vec_file(_write(tmp_path, "2 2\na 1 2\nb 1 x\n"))


def test_count_mismatch_only_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        vec = parse_vec_file(_write(tmp_path, "5 2\na 1 2\nb 3 4\nc 5 6\n"))
    assert len(vec) == 3
    assert "declares 5" in caplog.text


def test_duplicate_token_keeps_last(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        vec = parse_vec_file(_write(tmp_path, "2 1\na 1\na 2\n"))
    assert vec["a"].tolist() == [2.0]
    assert "duplicate" in caplog.text


def test_crlf_and_trailing_space(tmp_path):
    path = tmp_path / "crlf.vec"
    path.write_bytes("1 2\r\nthể_thao 0.5 -1 \r\n".encode("utf-8"))
    np.testing.assert_array_equal(parse_vec_file(path)["thể_thao"], [0.5, -1.0])


def test_keep_filters_but_still_validates(tmp_path):
    vec = parse_vec_file(_write(tmp_path, "2 1\na 1\nb 2\n"), keep={"b"})
    assert list(vec.entries) == ["b"]
    with pytest.raises(FormatError):
        parse_vec_file(_write(tmp_path, "2 1\na 1\nb 2 3\n"), keep={"a"})


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vec = VecFile(3, 4, {t: rng.normal(size=4).astype(np.float32) for t in ("x", "y", "đm")})
    write_vec_file(vec, tmp_path / "out.vec")
    back = parse_vec_file(tmp_path / "out.vec")
    for token, arr in vec.entries.items():
        np.testing.assert_allclose(back[token], arr, atol=1e-6)


def test_matrix_rows_and_coverage():
    vocab = Vocabulary(["a", "b", "c", "d"])
    vec = VecFile(2, 2, {"a": np.array([1.0, 2.0]), "c": np.array([3.0, 4.0]), "zzz": np.ones(2)})
    table = build_embedding_matrix(vec, vocab, rng=0)
    assert table.coverage == pytest.approx(0.5)
    assert table.weights.shape == (6, 2)
    np.testing.assert_array_equal(table.weights[0], [0, 0])
    np.testing.assert_array_equal(table.weights[vocab.index("c")], [3, 4])
    oov = table.weights[[1, vocab.index("b"), vocab.index("d")]]
    assert np.all(np.abs(oov) <= OOV_INIT_RANGE)


def test_dimension_mismatch():
    vec = VecFile(1, 2, {"a": np.ones(2)})
    with pytest.raises(ConfigError):
        build_embedding_matrix(vec, Vocabulary(["a"]), rng=0, embed_dim=300)


def test_random_table_is_seeded():
    a = random_embedding_table(10, 3, 7)
    b = random_embedding_table(10, 3, 7)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert np.all(a.weights[0] == 0)
