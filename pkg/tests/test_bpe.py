import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xdocvec import bpe
from xdocvec.errors import InputError

words = st.text(alphabet="abcdefg", min_size=1, max_size=8)
sentences = st.lists(words, min_size=1, max_size=10)


class TestLearn:
    def test_first_merge_by_frequency(self):
        # "aaab aaab": pair (a,a) occurs 4 times, (a,b) twice -> (a,a) wins
        model = bpe.learn_bpe(["aaab aaab"], num_merges=1)
        assert model.merges == [("a", "a")]

    def test_zero_merges_is_character_level(self):
        model = bpe.learn_bpe(["abc def"], num_merges=0)
        assert model.merges == []
        assert bpe.apply_bpe(model, ["abc"]) == ["a", "b", "c", bpe.END_OF_WORD]

    def test_unique_characters_stop_early(self):
        model = bpe.learn_bpe(["ab cd ef"], num_merges=10)
        assert model.num_merges < 10

    def test_empty_corpus_rejected(self):
        with pytest.raises(InputError):
            bpe.learn_bpe(["   ", ""], num_merges=5)

    def test_deterministic(self):
        corpus = ["abab cdcd abab", "cdab baba"]
        a = bpe.learn_bpe(corpus, 20).merges
        b = bpe.learn_bpe(corpus, 20).merges
        assert a == b


class TestApply:
    def test_seen_word_becomes_single_token(self):
        model = bpe.learn_bpe(["banana banana banana"], num_merges=20)
        out = bpe.apply_bpe(model, ["banana"])
        assert out == ["banana" + bpe.END_OF_WORD]

    def test_empty_word_list(self):
        model = bpe.learn_bpe(["ab"], 1)
        assert bpe.apply_bpe(model, []) == []

    def test_marker_never_mid_token(self):
        model = bpe.learn_bpe(["aaa aab aba baa"], num_merges=30)
        for token in bpe.apply_bpe(model, ["aaa", "aab", "aba", "baa", "zq"]):
            assert bpe.END_OF_WORD not in token[:-len(bpe.END_OF_WORD)]

    @settings(max_examples=50, deadline=None)
    @given(sentences, st.integers(0, 30))
    def test_round_trip_lossless(self, sentence, merges):
        model = bpe.learn_bpe([" ".join(sentence)], merges)
        subwords = bpe.apply_bpe(model, sentence)
        assert bpe.join_bpe(subwords) == " ".join(sentence)

    @settings(max_examples=50, deadline=None)
    @given(sentences, st.integers(1, 30))
    def test_merges_never_increase_token_count(self, sentence, merges):
        corpus = [" ".join(sentence)]
        base = len(bpe.apply_bpe(bpe.learn_bpe(corpus, 0), sentence))
        merged = len(bpe.apply_bpe(bpe.learn_bpe(corpus, merges), sentence))
        assert merged <= base

    def test_unseen_characters_pass_through(self):
        model = bpe.learn_bpe(["aa aa"], 2)
        out = bpe.apply_bpe(model, ["xy"])
        assert out == ["x", "y", bpe.END_OF_WORD]


class TestVocabulary:
    def test_round_trip(self):
        model = bpe.learn_bpe(["the cat sat on the mat"], 10)
        subwords = bpe.apply_bpe(model, "the cat sat".split())
        vocab = bpe.Vocabulary.build(subwords)
        ids = bpe.encode(vocab, subwords)
        assert ids[-1] == bpe.EOS_ID
        assert bpe.decode(vocab, ids) == subwords

    def test_unknown_symbol_maps_to_unk(self):
        vocab = bpe.Vocabulary.build(["a", "b"])
        assert bpe.encode(vocab, ["zzz"])[0] == bpe.UNK_ID

    def test_empty_sequence_encodes_to_eos(self):
        vocab = bpe.Vocabulary.build(["a"])
        assert bpe.encode(vocab, []) == [bpe.EOS_ID]

    def test_out_of_range_decode_rejected(self):
        vocab = bpe.Vocabulary.build(["a"])
        with pytest.raises(InputError):
            bpe.decode(vocab, [99])

    def test_size_limit_respected(self):
        vocab = bpe.Vocabulary.build([f"s{i}" for i in range(100)], limit=10)
        assert vocab.size == 10

    def test_bijective_over_non_reserved(self):
        vocab = bpe.Vocabulary.build(["x", "y", "z", "x"])
        assert len(vocab.id_of) == len(vocab.symbol_of)


class TestFiles:
    def test_merge_file_round_trip(self, tmp_path):
        model = bpe.learn_bpe(["abab abab cdcd"], 5)
        path = tmp_path / "merges.txt"
        bpe.save_merges(model, str(path))
        loaded = bpe.load_merges(str(path))
        assert loaded.merges == model.merges
        text = path.read_text()
        assert text.endswith("\n")
        assert all(len(line.split(" ")) == 2 for line in text.splitlines())

    def test_vocab_file_round_trip(self, tmp_path):
        vocab = bpe.Vocabulary.build(["alpha", "beta", "beta"])
        path = tmp_path / "vocab.tsv"
        bpe.save_vocab(vocab, str(path))
        loaded = bpe.load_vocab(str(path))
        assert loaded.id_of == vocab.id_of
