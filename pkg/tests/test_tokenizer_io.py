import gzip
import json

import pytest

from adaptbpe.adapt import AdaptConfig, adapt
from adaptbpe.baselines import first_k
from adaptbpe.engine import tokenize_corpus
from adaptbpe.errors import (
    DigestMismatch,
    ImproperMerge,
    MalformedMerge,
    UnsupportedModelType,
    VocabMergeMismatch,
)
from adaptbpe.pretokenize import BYTE_ALPHABET, PretokenizerSpec
from adaptbpe.tokenizer_io import (
    AdaptedTokenizer,
    check_pairing,
    compat_table,
    export_compat,
    export_mask,
    load_adapted,
    load_any,
    load_pretrained,
    save_adapted,
)
from helpers import fixture_hist, fixture_table

TOY_VOCAB = {"a": 0, "b": 1, "c": 2, "d": 3, "ab": 4, "abc": 5, "cd": 6, "abab": 7, "abcd": 8}
TOY_MERGES = ["a b", "ab c", "c d", "ab ab", "abc d"]


def toy_file(tmp_path, merges=TOY_MERGES, vocab=TOY_VOCAB, **extra):
    doc = {
        "version": "1.0",
        "added_tokens": [],
        "pre_tokenizer": {"type": "WhitespaceSplit"},
        "model": {"type": "BPE", "vocab": vocab, "merges": merges},
    }
    doc.update(extra)
    path = tmp_path / "tokenizer.json"
    path.write_text(json.dumps(doc))
    return path


def adapted_fixture(tmp_path):
    src = load_pretrained(toy_file(tmp_path))
    return src, adapt(src.table, fixture_hist(), AdaptConfig(budget=2))


def test_load_toy(tmp_path):
    src = load_pretrained(toy_file(tmp_path))
    assert src.spec == PretokenizerSpec.whitespace()
    assert src.table.alphabet == ("a", "b", "c", "d")
    assert len(src.table) == 5
    assert not src.merges_as_pairs


def test_pair_format_and_directory(tmp_path):
    path = toy_file(tmp_path, merges=[m.split() for m in TOY_MERGES])
    a = load_pretrained(path)
    b = load_pretrained(tmp_path)
    assert a.table == b.table and a.merges_as_pairs


def test_gzip(tmp_path):
    path = toy_file(tmp_path)
    gz = tmp_path / "t.json.gz"
    gz.write_bytes(gzip.compress(path.read_bytes()))
    assert load_pretrained(gz).table == load_pretrained(path).table


def test_empty_merges(tmp_path):
    src = load_pretrained(toy_file(tmp_path, merges=[]))
    assert len(src.table) == 0


def test_unigram_rejected(tmp_path):
    path = tmp_path / "u.json"
    path.write_text(json.dumps({"model": {"type": "Unigram", "vocab": [["a", 0.0]]}}))
    with pytest.raises(UnsupportedModelType):
        load_pretrained(path)


def test_malformed_and_mismatch(tmp_path):
    with pytest.raises(MalformedMerge):
        load_pretrained(toy_file(tmp_path, merges=["a b c"]))
    vocab = dict(TOY_VOCAB)
    del vocab["cd"]
    with pytest.raises(VocabMergeMismatch):
        load_pretrained(toy_file(tmp_path, vocab=vocab))
    with pytest.raises(ImproperMerge):
        load_pretrained(toy_file(tmp_path, merges=["ab c", "a b"]))


def test_bytelevel_alphabet_follows_vocab_ids(tmp_path):
    vocab = {u: i for i, u in enumerate(reversed(BYTE_ALPHABET))}
    vocab["Ġt"] = 256
    path = toy_file(tmp_path, merges=["Ġ t"], vocab=vocab, pre_tokenizer={"type": "ByteLevel"})
    src = load_pretrained(path)
    assert src.table.alphabet == tuple(reversed(BYTE_ALPHABET))
    assert src.spec.byte_level


def test_round_trip_byte_identical(tmp_path):
    src, res = adapted_fixture(tmp_path)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_adapted(p1, res, src.spec, source_digest=src.digest)
    loaded = load_adapted(p1)
    assert loaded.table == res.table
    assert loaded.provenance["swaps"] == 1 and loaded.provenance["margin"] == 0
    save_adapted(p2, loaded.table, loaded.spec, provenance=loaded.provenance)
    assert p1.read_bytes() == p2.read_bytes()
    assert tokenize_corpus(loaded.table, fixture_hist()).token_total == 17
    table, spec, pre = load_any(p1)
    assert table == res.table and pre is None


def test_infinite_margin_serialized(tmp_path):
    src = load_pretrained(toy_file(tmp_path))
    res = adapt(src.table, fixture_hist(), AdaptConfig(budget=2, margin=float("inf")))
    save_adapted(tmp_path / "a.json", res, src.spec)
    assert json.loads((tmp_path / "a.json").read_text())["provenance"]["margin"] == "inf"


def test_mask(tmp_path):
    src, res = adapted_fixture(tmp_path)
    doc = export_mask(res, src.vocab, tmp_path / "m.json", src.digest)
    assert doc["allowed_ids"] == [0, 1, 2, 3, 4, 6]
    assert doc["count"] == 6
    doc = export_mask(res, src.vocab, tmp_path / "m.json", src.digest, special_ids=[9])
    assert doc["allowed_ids"] == [0, 1, 2, 3, 4, 6, 9]


def test_digest_pairing(tmp_path):
    src, res = adapted_fixture(tmp_path)
    ad = AdaptedTokenizer(res.table, src.spec, {"source_digest": "0" * 64})
    with pytest.raises(DigestMismatch):
        check_pairing(ad, src)
    check_pairing(AdaptedTokenizer(res.table, src.spec, {"source_digest": src.digest}), src)


def test_compat_export_reports_divergence(tmp_path):
    src, res = adapted_fixture(tmp_path)
    report = export_compat(res.table, tmp_path / "merges.txt", fixture_hist(), report_path=tmp_path / "r.json")
    assert report["dropped_ranks"] == [1]
    assert not report["lossless"] and not report["lossless_on_corpus"]
    assert [d["word"] for d in report["divergent_words"]] == ["abcd"]
    assert (tmp_path / "merges.txt").read_text() == "#version: 0.2\na b\nc d\n"
    assert "abcd" in (tmp_path / "r.json").read_text()


def test_compat_export_into_source_file(tmp_path):
    src, res = adapted_fixture(tmp_path)
    out = tmp_path / "out.json"
    export_compat(res.table, out, fixture_hist(), source=src)
    reloaded = load_pretrained(out)
    assert reloaded.vocab == src.vocab
    assert reloaded.table.ranks == [0, 1]


def test_compat_lossless_for_plain_prefix():
    plain, dropped = compat_table(first_k(fixture_table(), 3))
    assert dropped == []
    assert len(plain) == 3

