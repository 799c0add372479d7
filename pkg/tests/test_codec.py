import threading
import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpekit import pretokenizer
from bpekit.codec import Codec, apply_merges, decode, encode
from bpekit.errors import IdOutOfRange
from bpekit.model import TokenizerModel
from bpekit.trainer import TrainerConfig, train, word_frequencies

from oracles import replay_merges


def test_encode_examples():
    m = TokenizerModel(merges=[(b"a", b"a")])
    assert encode(b"", m) == []
    assert encode(b"aaab", m) == [256, ord("a"), ord("b")]
    assert decode(encode(b"aaab", m), m) == b"aaab"


def test_apply_merges_examples():
    assert apply_merges(b"ab", TokenizerModel(merges=[])) == [b"a", b"b"]
    assert apply_merges(b"aaa", TokenizerModel(merges=[(b"a", b"a")])) == [b"aa", b"a"]
    assert apply_merges(b"aaaa", TokenizerModel(merges=[(b"a", b"a"), (b"aa", b"aa")])) == [b"aaaa"]


def test_lower_rank_wins_over_position():
    m = TokenizerModel(merges=[(b"b", b"c"), (b"a", b"b")])
    assert apply_merges(b"abc", m) == [b"a", b"bc"]


def test_digits_encode_one_token_each(desk_model):
    assert len(encode(b"1234567890", desk_model)) == 10


def test_decode_examples(desk_model):
    assert decode([], desk_model) == b""
    s = "한국어 텍스트 123".encode()
    assert decode(encode(s, desk_model), desk_model) == s
    with pytest.raises(IdOutOfRange):
        decode([desk_model.vocab_size], desk_model)
    with pytest.raises(IdOutOfRange):
        decode([-1], desk_model)


def test_specials(toy_model):
    think = toy_model.special_ids()["<|think|>"]
    assert think == 256 + len(toy_model.merges)
    ids = encode(b"ab<|think|>c", toy_model, parse_specials=True)
    assert ids == [256, think, ord("c")]
    # off by default: the literal is ordinary text
    plain = encode(b"ab<|think|>c", toy_model)
    assert think not in plain
    assert decode(plain, toy_model) == decode(ids, toy_model) == b"ab<|think|>c"


def test_trained_words_reencode_to_trained_form(desk_model):
    # every merge's concatenation, encoded as its own pre-token, is one token
    codec = Codec(desk_model)
    for a, b in desk_model.merges[:500]:
        tok = a + b
        if [p.bytes for p in pretokenizer.split(tok)] == [tok]:
            assert codec.apply_merges(tok) == [tok]


def test_codec_is_thread_safe(desk_model):
    samples = [f"text {i} 한국어 code_{i}()".encode() for i in range(300)]
    expected = [encode(s, desk_model) for s in samples]
    errors = []

    def work():
        c = Codec(desk_model, cache_size=16)
        for s, e in zip(samples, expected):
            if c.encode(s) != e:
                errors.append(s)

    threads = [threading.Thread(target=work) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors


any_bytes = st.one_of(
    st.binary(max_size=120),
    st.text(max_size=60).map(lambda s: s.encode("utf-8", "surrogatepass")),
    st.text(alphabet="한국어 텍스트0123456789\n\t😀", max_size=40).map(str.encode),
)


@settings(max_examples=300, deadline=None)
@given(any_bytes)
def test_round_trip(desk_model, data):
    assert decode(encode(data, desk_model), desk_model) == data


@settings(max_examples=200, deadline=None)
@given(any_bytes)
def test_tokens_stay_inside_pretokens_and_isolate_digits(desk_model, data):
    bounds = set()
    for p in pretokenizer.split(data):
        bounds.add(p.offset)
        bounds.add(p.offset + len(p.bytes))
    vocab = Codec(desk_model).id_bytes
    pos = 0
    for i in encode(data, desk_model):
        tok = vocab[i]
        inner = range(pos + 1, pos + len(tok))
        assert not bounds.intersection(inner)
        text = tok.decode("utf-8", "surrogateescape")
        assert sum(unicodedata.category(c).startswith("N") for c in text) <= 1
        pos += len(tok)


@settings(max_examples=300, deadline=None)
@given(st.binary(min_size=1, max_size=40))
def test_apply_merges_matches_replayer(desk_model, piece):
    assert apply_merges(piece, desk_model) == replay_merges(piece, desk_model.merges)


@settings(max_examples=100, deadline=None)
@given(st.binary(min_size=1, max_size=12).map(lambda b: bytes(x % 3 + 97 for x in b)))
def test_apply_merges_matches_replayer_dense(piece):
    merges = [(b"a", b"b"), (b"b", b"c"), (b"ab", b"c"), (b"c", b"a"), (b"a", b"a"), (b"aa", b"aa"), (b"bc", b"ab")]
    m = TokenizerModel(merges=merges)
    assert apply_merges(piece, m) == replay_merges(piece, merges)


def test_token_count_shrinks_as_vocab_grows(desk_mixture):
    from bpekit import corpus

    def docs():
        return corpus.sample_mixture(corpus.MixtureSpec.load(desk_mixture))

    big = train(docs(), TrainerConfig(target_vocab=1500))
    counts, _ = word_frequencies(docs(), TrainerConfig(target_vocab=1500))
    totals = []
    for n in (0, 50, 200, 600, len(big.merges)):
        m = TokenizerModel(merges=big.merges[:n])
        totals.append(sum(len(apply_merges(w, m)) * f for w, f in counts.items()))
    assert totals == sorted(totals, reverse=True)
