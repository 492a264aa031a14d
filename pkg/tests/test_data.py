import numpy as np
import pytest

from ckgru.config import RunConfig
from ckgru.data import DatasetError, LABELS, ingest_dataset, load_bundle, prepare_samples, write_tokenized


def _write(tmp_path, text, name="data.tsv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_ingest_well_formed_rows(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\n"
                            "a\thello world\tpositive\n"
                            "b\tbad day\tnegative\n"
                            "c\tmeh\tneutral\n")
    rows = ingest_dataset(path)
    assert len(rows) == 3
    assert rows[0].label == LABELS.index("positive")
    assert rows[1].text == "bad day"


def test_ingest_label_case_insensitive(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\na\thi\tPositive\n")
    assert ingest_dataset(path)[0].label == LABELS.index("positive")


def test_ingest_missing_text_column_names_it(tmp_path):
    path = _write(tmp_path, "id\tlabel\na\tpositive\n")
    with pytest.raises(DatasetError) as err:
        ingest_dataset(path)
    assert "text" in str(err.value)


def test_ingest_malformed_row_names_line(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\na\thi\tpositive\nb\tonly-two\n")
    with pytest.raises(DatasetError) as err:
        ingest_dataset(path)
    assert ":3" in str(err.value)


def test_ingest_unknown_label_and_missing_label(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\na\thi\tmixed\n")
    with pytest.raises(DatasetError):
        ingest_dataset(path)
    path2 = _write(tmp_path, "id\ttext\tlabel\na\thi\t\n", name="d2.tsv")
    with pytest.raises(DatasetError):
        ingest_dataset(path2)
    rows = ingest_dataset(path2, require_labels=False)
    assert rows[0].label is None


def test_ingest_empty_text_rejected(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\na\t \tpositive\n")
    with pytest.raises(DatasetError):
        ingest_dataset(path)


def test_ingest_metadata_columns(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\tpost_date\tfollowers\tverified\n"
                            "a\thi there\tpositive\t2021-03-01\t120\tyes\n"
                            "b\tbye\tnegative\t18500\t0\tno\n")
    rows = ingest_dataset(path)
    assert rows[0].meta["post_date"] == 18687  # days from 1970-01-01 to 2021-03-01
    assert rows[0].meta["followers"] == 120
    assert rows[0].meta["verified"] == 1
    assert rows[1].meta["post_date"] == 18500


def test_ingest_bad_metadata_values(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\tfollowers\na\thi\tpositive\tmany\n")
    with pytest.raises(DatasetError):
        ingest_dataset(path)


def test_prepare_samples_shapes(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\n"
                            "a\t@bob loves vaccines!! http://x.co\tpositive\n")
    cfg = RunConfig(dataset=str(path), d_c=4)
    bundle = load_bundle(cfg)
    prepared = prepare_samples(ingest_dataset(path), bundle, cfg)
    p = prepared[0]
    k = len(p.tokens)
    assert p.onehot.shape == (k, cfg.pos_size + cfg.dep_size)
    assert p.alphas.shape == (k, cfg.d_c)
    assert p.vad.shape == (9,)
    assert p.meta_full.shape == (17,)
    assert p.meta_full[5] == 1.0  # one mention


def test_pretagged_columns_bypass_tagger(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\ttokens\tpos_ids\tdep_ids\n"
                            "a\toriginal text here\tpositive\tfoo bar\t3,4\t1,0\n")
    cfg = RunConfig(dataset=str(path))
    bundle = load_bundle(cfg)
    p = prepare_samples(ingest_dataset(path), bundle, cfg)[0]
    assert p.tokens == ["foo", "bar"]
    assert p.pos_ids == [3, 4]
    assert p.dep_ids == [1, 0]


def test_pretagged_out_of_range_tag_rejected(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\ttokens\tpos_ids\tdep_ids\n"
                            "a\tx\tpositive\tfoo\t99\t0\n")
    cfg = RunConfig(dataset=str(path))
    bundle = load_bundle(cfg)
    with pytest.raises(ValueError):
        prepare_samples(ingest_dataset(path), bundle, cfg)


def test_preprocess_output_reingests_as_pretagged(tmp_path):
    path = _write(tmp_path, "id\ttext\tlabel\n"
                            "a\tVaccines work!! #VaccinesWork\tpositive\n"
                            "b\t@bob disagrees strongly\tnegative\n")
    cfg = RunConfig(dataset=str(path))
    bundle = load_bundle(cfg)
    prepared = prepare_samples(ingest_dataset(path), bundle, cfg)
    out = tmp_path / "tokenized.tsv"
    # the tokenized file has no text column, so splice one in for re-ingest
    write_tokenized(out, prepared)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id\ttokens\tpos_ids\tdep_ids\tlabel"
    merged = tmp_path / "merged.tsv"
    rows = [line.split("\t") for line in lines[1:]]
    with open(merged, "w", encoding="utf-8") as fh:
        fh.write("id\ttext\ttokens\tpos_ids\tdep_ids\tlabel\n")
        for (rid, toks, pos, dep, label), raw in zip(rows, prepared):
            fh.write(f"{rid}\t{raw.text}\t{toks}\t{pos}\t{dep}\t{label}\n")
    again = prepare_samples(ingest_dataset(merged), bundle, cfg)
    for a, b in zip(prepared, again):
        assert a.tokens == b.tokens
        assert a.pos_ids == b.pos_ids
        assert a.dep_ids == b.dep_ids
        assert np.array_equal(a.onehot, b.onehot)
