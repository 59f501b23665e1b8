import numpy as np
import pytest

from guidenet.core.errors import ConfigError, ContractError
from guidenet.models.config import CUE_WORDS, DEFAULT_WORDS, RESERVED_TOKENS, preset
from guidenet.nn.text import PAD_ID, UNK_ID, Vocab, tokenize


class TestVocab:

    def test_reserved_ids(self):
        vocab = Vocab(DEFAULT_WORDS)
        assert vocab.tokens[:2] == list(RESERVED_TOKENS)
        assert vocab.lookup("<pad>") == PAD_ID
        assert vocab.lookup("nonsense") == UNK_ID
        assert len(vocab) == len(DEFAULT_WORDS) + 2

    def test_json_round_trip(self):
        vocab = Vocab(["b", "a"])
        assert Vocab.from_json(vocab.to_json()).tokens == ["<pad>", "<unk>", "a", "b"]

    def test_from_json_requires_reserved_prefix(self):
        with pytest.raises(ContractError):
            Vocab.from_json(["a", "b"])

    def test_default_vocab_fits_every_preset(self):
        for name in ("desk", "paper", "tiny"):
            vocab = Vocab(DEFAULT_WORDS)
            assert vocab.check_fits(preset(name).vocab_size) is vocab

    def test_extra_word_overflows_embedding_table(self):
        with pytest.raises(ConfigError, match="vocab_size"):
            Vocab(("aaa", *DEFAULT_WORDS)).check_fits(preset("tiny").vocab_size)

    def test_cue_words_disjoint(self):
        assert not set(CUE_WORDS[0]) & set(CUE_WORDS[1])


class TestTokenize:

    def test_pads_to_length(self):
        vocab = Vocab(["live", "fight"])
        ids = tokenize("Live FIGHT", vocab, 4)
        assert ids.dtype == np.int64
        assert list(ids) == [vocab.lookup("live"), vocab.lookup("fight"), PAD_ID, PAD_ID]

    def test_truncates(self):
        vocab = Vocab(["a"])
        assert len(tokenize("a a a a a a", vocab, 4)) == 4

    def test_unknown_words_map_to_unk(self):
        assert list(tokenize("zzz", Vocab(["a"]), 1)) == [UNK_ID]
