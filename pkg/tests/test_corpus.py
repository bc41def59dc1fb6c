import json
import random

import pytest

from sumsearch.corpus import (
    BOS,
    EOS,
    PAD,
    UNK,
    CodeCommentPair,
    CorpusError,
    PairSet,
    Vocab,
    build_vocab,
    decode_ids,
    encode_ids,
    load_corpus,
    split_corpus,
)


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r) + "\n")


class TestLoadCorpus:
    def test_two_lines_default_ids(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"code": "def a(): pass", "comment": "a"}, {"code": "def b(): pass", "comment": "b"}])
        pairs = load_corpus(path)
        assert pairs.size == 2
        assert pairs.ids() == ["1", "2"]

    def test_missing_comment_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"code": "x", "comment": "y"}, {"code": "x2", "comment": "y2"}, {"code": "z"}])
        with pytest.raises(CorpusError, match="line 3: missing field comment"):
            load_corpus(path)

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"code": "x", "comment": "y"}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(CorpusError, match="empty corpus"):
            load_corpus(path)

    def test_empty_code_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"code": "  ", "comment": "y"}])
        with pytest.raises(CorpusError, match="line 1"):
            load_corpus(path)

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"id": "a", "code": "x", "comment": "y"}, {"id": "a", "code": "x2", "comment": "y2"}])
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(path)

    def test_large_file_no_collisions(self, tmp_path):
        path = tmp_path / "big.jsonl"
        with open(path, "w", encoding="utf-8") as f:
            for i in range(120_000):
                f.write(json.dumps({"code": f"def f{i}(): pass", "comment": f"function {i}"}) + "\n")
        pairs = load_corpus(path)
        assert pairs.size == 120_000
        assert len(set(pairs.ids())) == 120_000


class TestSplitCorpus:
    def make(self, n):
        return PairSet(tuple(CodeCommentPair(str(i), f"code {i}", f"comment {i}") for i in range(n)))

    def test_sizes_10(self):
        train, val, test = split_corpus(self.make(10), seed=7)
        assert (train.size, val.size, test.size) == (6, 2, 2)

    def test_sizes_11_remainder_to_test(self):
        train, val, test = split_corpus(self.make(11), seed=7)
        assert (train.size, val.size, test.size) == (6, 2, 3)

    def test_too_small_rejected(self):
        with pytest.raises(CorpusError):
            split_corpus(self.make(4), seed=0)

    def test_deterministic_and_seed_sensitive(self):
        pairs = self.make(50)
        a = split_corpus(pairs, seed=3)
        b = split_corpus(pairs, seed=3)
        assert [p.ids() for p in a] == [p.ids() for p in b]
        c = split_corpus(pairs, seed=4)
        assert [p.ids() for p in a] != [p.ids() for p in c]

    def test_partition_property(self):
        pairs = self.make(37)
        train, val, test = split_corpus(pairs, seed=11)
        combined = sorted(train.ids() + val.ids() + test.ids())
        assert combined == sorted(pairs.ids())
        assert not (set(train.ids()) & set(val.ids()))
        assert not (set(train.ids()) & set(test.ids()))
        assert not (set(val.ids()) & set(test.ids()))


class TestBuildVocab:
    def test_frequency_order(self):
        vocab = build_vocab([["a", "b", "a"]], max_size=100, min_freq=1)
        assert vocab.id_for("a") == 4
        assert vocab.id_for("b") == 5

    def test_lexicographic_tie_break(self):
        vocab = build_vocab([["y", "x", "y", "x"]], max_size=100, min_freq=1)
        assert vocab.id_for("x") == 4
        assert vocab.id_for("y") == 5

    def test_max_size_cap(self):
        seqs = [[f"tok{i:05d}"] for i in range(10_000)]
        vocab = build_vocab(seqs, max_size=1000, min_freq=1)
        assert len(vocab) == 1000

    def test_min_freq_filter(self):
        vocab = build_vocab([["a", "a", "b"]], max_size=100, min_freq=2)
        assert "a" in vocab
        assert "b" not in vocab

    def test_empty_input_reserved_only(self):
        vocab = build_vocab([], max_size=100, min_freq=1)
        assert len(vocab) == 4

    def test_order_independence(self):
        rng = random.Random(5)
        seqs = [[rng.choice("abcdefg") for _ in range(10)] for _ in range(30)]
        shuffled = list(seqs)
        rng.shuffle(shuffled)
        v1 = build_vocab(seqs, 100, 1)
        v2 = build_vocab(shuffled, 100, 1)
        assert v1.token_to_id == v2.token_to_id

    def test_reserved_ids_fixed(self):
        vocab = build_vocab([["a"]], 100, 1)
        assert (PAD, UNK, BOS, EOS) == (0, 1, 2, 3)
        assert vocab.token_for(0) == "<pad>"
        assert vocab.token_for(3) == "</s>"


class TestEncodeIds:
    def test_known_token(self):
        vocab = build_vocab([["a"]], 100, 1)
        assert encode_ids(["a"], vocab) == [4]

    def test_unknown_maps_to_unk(self):
        vocab = build_vocab([["a"]], 100, 1)
        assert encode_ids(["zzz"], vocab) == [UNK]

    def test_bos_eos_framing(self):
        vocab = build_vocab([["a"]], 100, 1)
        assert encode_ids(["a"], vocab, add_bos_eos=True) == [BOS, 4, EOS]

    def test_round_trip(self):
        vocab = build_vocab([["alpha", "beta", "gamma"]], 100, 1)
        tokens = ["alpha", "gamma", "beta", "beta"]
        assert decode_ids(encode_ids(tokens, vocab), vocab) == tokens

    def test_vocab_json_round_trip(self):
        vocab = build_vocab([["a", "b", "b"]], 64, 1)
        restored = Vocab.from_json(vocab.to_json())
        assert restored.token_to_id == vocab.token_to_id
        assert restored.id_to_token == vocab.id_to_token
