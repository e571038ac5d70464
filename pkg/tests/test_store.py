import numpy as np
import pytest

from regibox.errors import FormatError, ValidationError
from regibox.store import (
    ClassTextEmbeddings,
    DatasetBundle,
    EmbeddingSet,
    normalize_rows,
    read_class_text_file,
    read_embedding_file,
    split_train_val,
    write_class_text_file,
    write_embedding_file,
)

from conftest import make_class_text, make_set, unit_rows


class TestNormalizeRows:
    def test_three_four_five(self):
        out = normalize_rows(np.array([[3.0, 4.0]]))
        assert np.allclose(out, [[0.6, 0.8]])

    def test_identity_on_unit_vector(self):
        out = normalize_rows(np.array([[0.0, 1.0]]))
        assert np.array_equal(out, [[0.0, 1.0]])

    def test_zero_row_reports_index(self):
        with pytest.raises(ValidationError, match="row 0"):
            normalize_rows(np.array([[0.0, 0.0]]))

    def test_direction_preserved(self, rng):
        mat = rng.standard_normal((20, 5)) * 3.0
        out = normalize_rows(mat)
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0)
        # positive scalar multiple of the input row
        scales = np.linalg.norm(mat, axis=1)
        assert np.allclose(out * scales[:, None], mat)


class TestEmbeddingSet:
    def test_non_unit_row_rejected(self):
        with pytest.raises(ValidationError, match="norm"):
            EmbeddingSet(np.array([[0.5, 0.0]], dtype=np.float32), np.array([0]))

    def test_drifted_row_renormalized(self):
        row = np.array([[0.6, 0.8]], dtype=np.float32) * np.float32(1 + 5e-4)
        out = EmbeddingSet(row, np.array([0]))
        assert abs(np.linalg.norm(out.data[0]) - 1.0) < 1e-6

    def test_label_length_mismatch(self):
        with pytest.raises(ValidationError):
            EmbeddingSet(np.array([[1.0, 0.0]], dtype=np.float32), np.array([0, 1]))

    def test_data_immutable(self, rng):
        embeddings = make_set(rng, 4, 3, 2)
        with pytest.raises(ValueError):
            embeddings.data[0, 0] = 0.5


class TestEmbeddingFile:
    def test_round_trip_simple(self, tmp_path):
        embeddings = EmbeddingSet(
            np.array([[0.6, 0.8]], dtype=np.float32), np.array([0], dtype=np.uint32)
        )
        path = tmp_path / "one.rgbx"
        write_embedding_file(embeddings, path)
        # header 16 bytes + 1 label + 2 floats payload
        assert path.stat().st_size == 16 + 4 + 8
        back = read_embedding_file(path)
        assert np.array_equal(back.data, embeddings.data)
        assert np.array_equal(back.labels, embeddings.labels)

    def test_round_trip_empty(self, tmp_path):
        empty = EmbeddingSet(np.zeros((0, 3), dtype=np.float32), np.zeros(0, dtype=np.uint32))
        path = tmp_path / "empty.rgbx"
        write_embedding_file(empty, path)
        back = read_embedding_file(path)
        assert back.count == 0
        assert back.dim == 3

    def test_round_trip_bit_identical(self, tmp_path, rng):
        embeddings = make_set(rng, 37, 9, 5)
        path = tmp_path / "many.rgbx"
        write_embedding_file(embeddings, path)
        back = read_embedding_file(path)
        assert back.data.tobytes() == embeddings.data.tobytes()
        assert back.labels.tobytes() == embeddings.labels.tobytes()
        # a second write produces identical bytes
        path2 = tmp_path / "again.rgbx"
        write_embedding_file(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_writer_refuses_non_unit(self, tmp_path):
        bad = EmbeddingSet(
            np.array([[0.5, 0.0]], dtype=np.float32), np.array([0]), unit_norm=False
        )
        with pytest.raises(ValidationError, match="refusing to write"):
            write_embedding_file(bad, tmp_path / "bad.rgbx")

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.rgbx"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(FormatError, match="magic"):
            read_embedding_file(path)

    def test_wrong_version(self, tmp_path, rng):
        path = tmp_path / "v2.rgbx"
        write_embedding_file(make_set(rng, 2, 3, 2), path)
        raw = bytearray(path.read_bytes())
        raw[4] = 2
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version"):
            read_embedding_file(path)

    def test_truncated_payload(self, tmp_path, rng):
        path = tmp_path / "trunc.rgbx"
        write_embedding_file(make_set(rng, 4, 3, 2), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-5])
        with pytest.raises(FormatError, match="truncated"):
            read_embedding_file(path)

    def test_trailing_garbage(self, tmp_path, rng):
        path = tmp_path / "extra.rgbx"
        write_embedding_file(make_set(rng, 4, 3, 2), path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FormatError, match="trailing"):
            read_embedding_file(path)

    def test_non_unit_rows_rejected_on_read(self, tmp_path, rng):
        path = tmp_path / "nonunit.rgbx"
        write_embedding_file(make_set(rng, 2, 3, 2), path)
        raw = bytearray(path.read_bytes())
        # overwrite the first payload float with 9.0
        payload_offset = 16 + 2 * 4
        raw[payload_offset : payload_offset + 4] = np.float32(9.0).tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(ValidationError, match="norm"):
            read_embedding_file(path)


class TestClassTextFile:
    def test_round_trip(self, tmp_path, rng):
        table = ClassTextEmbeddings(
            unit_rows(rng, 3, 5).astype(np.float32), ["cat", "dog", "night owl"]
        )
        path = tmp_path / "classes.rgbt"
        write_class_text_file(table, path)
        back = read_class_text_file(path)
        assert back.class_names == ["cat", "dog", "night owl"]
        assert back.data.tobytes() == table.data.tobytes()

    def test_unicode_names(self, tmp_path, rng):
        table = ClassTextEmbeddings(
            unit_rows(rng, 2, 4).astype(np.float32), ["naive", "渡り鳥"]
        )
        path = tmp_path / "uni.rgbt"
        write_class_text_file(table, path)
        assert read_class_text_file(path).class_names == ["naive", "渡り鳥"]

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.rgbt"
        path.write_bytes(b"RGBX" + b"\x00" * 12)
        with pytest.raises(FormatError, match="magic"):
            read_class_text_file(path)

    def test_truncated_names(self, tmp_path, rng):
        path = tmp_path / "trunc.rgbt"
        write_class_text_file(make_class_text(rng, 3, 4), path)
        path.write_bytes(path.read_bytes()[:20])
        with pytest.raises(FormatError, match="truncated"):
            read_class_text_file(path)

    def test_name_count_mismatch_rejected(self, rng):
        with pytest.raises(ValidationError):
            ClassTextEmbeddings(unit_rows(rng, 3, 4).astype(np.float32), ["a", "b"])


class TestBundle:
    def test_dim_mismatch(self, rng):
        with pytest.raises(ValidationError, match="dim"):
            DatasetBundle(
                train=make_set(rng, 4, 3, 2),
                val=make_set(rng, 4, 3, 2),
                test_in_domain=make_set(rng, 4, 4, 2),
                test_out_domain=None,
                class_text=make_class_text(rng, 2, 3),
            )

    def test_label_out_of_range(self, rng):
        bad = EmbeddingSet(
            unit_rows(rng, 4, 3).astype(np.float32), np.array([0, 1, 2, 5], dtype=np.uint32)
        )
        with pytest.raises(ValidationError, match="label"):
            DatasetBundle(
                train=bad,
                val=make_set(rng, 4, 3, 2),
                test_in_domain=make_set(rng, 4, 3, 2),
                test_out_domain=None,
                class_text=make_class_text(rng, 2, 3),
            )


class TestSplit:
    def test_sizes_and_determinism(self, rng):
        embeddings = make_set(rng, 10, 4, 3)
        train1, val1 = split_train_val(embeddings, 0.2, seed=7)
        train2, val2 = split_train_val(embeddings, 0.2, seed=7)
        assert (train1.count, val1.count) == (8, 2)
        assert np.array_equal(train1.data, train2.data)
        assert np.array_equal(val1.data, val2.data)

    def test_partition(self, rng):
        embeddings = make_set(rng, 23, 4, 3)
        train, val = split_train_val(embeddings, 0.3, seed=11)
        assert train.count + val.count == 23
        rows = {r.tobytes() for r in train.data} | {r.tobytes() for r in val.data}
        assert len(rows) == 23

    def test_different_seeds_differ(self, rng):
        # enumerate both splits and compare the membership directly
        embeddings = make_set(rng, 10, 4, 3)
        _, val7 = split_train_val(embeddings, 0.2, seed=7)
        _, val8 = split_train_val(embeddings, 0.2, seed=8)
        assert val7.data.tobytes() != val8.data.tobytes()

    @pytest.mark.parametrize("fraction", [0.0, 1.0, 1.5, -0.2])
    def test_bad_fraction(self, rng, fraction):
        with pytest.raises(ValidationError):
            split_train_val(make_set(rng, 10, 4, 3), fraction, seed=1)

    def test_too_small(self, rng):
        with pytest.raises(ValidationError):
            split_train_val(make_set(rng, 1, 4, 3), 0.5, seed=1)
