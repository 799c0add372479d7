import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bpekit import corpus, synth
from bpekit.corpus import CorpusSource, LoadStats, MixtureSpec, load_documents, sample_mixture, shard_files, shard_plan
from bpekit.errors import ConfigInvalid, InvalidRank, SourceExhausted


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_load_documents_examples(tmp_path):
    f = write_lines(tmp_path / "a.jsonl", ['{"text":"a"}', '{"text":"b"}'])
    assert list(load_documents([f])) == ["a", "b"]
    empty = write_lines(tmp_path / "empty.jsonl", [])
    assert list(load_documents([empty])) == []
    bad = write_lines(tmp_path / "bad.jsonl", ['{"text":"a"}', '{"title":"x"}', "not json", '{"text":3}'])
    stats = LoadStats()
    assert list(load_documents([bad], stats)) == ["a"]
    assert stats.malformed_count == 3 and stats.documents == 1
    assert stats.malformed[0].endswith("bad.jsonl:2")


def test_directories_and_chat_records(tmp_path):
    write_lines(tmp_path / "b.jsonl", ['{"text":"second"}'])
    rec = {"messages": [{"role": "user", "segments": [{"type": "text", "text": "hi"}]}]}
    write_lines(tmp_path / "a.jsonl", [json.dumps(rec)])
    (tmp_path / "c.txt").write_text("plain file")
    (tmp_path / "ignored.csv").write_text("x")
    docs = list(load_documents([tmp_path]))
    assert docs == [rec, "second", "plain file"]
    assert corpus.document_text(rec) == b"<|user|>hi<|eot|>"
    assert corpus.doc_bytes(rec) == len(b"<|user|>hi<|eot|>")


def test_table1_weights_normalize():
    spec = MixtureSpec(
        [CorpusSource(k, ["x"], w) for k, w in corpus.TABLE1_WEIGHTS.items()], total_bytes=100
    )
    got = {k: round(float(v), 4) for k, v in spec.normalized_weights().items()}
    assert got == {
        "english": 0.4167, "korean": 0.2292, "code": 0.1250,
        "math": 0.1042, "multilingual": 0.0833, "domain_specific": 0.0417,
    }
    assert sum(spec.normalized_weights().values()) == 1


def test_single_source_truncated_at_budget(tmp_path):
    f = write_lines(tmp_path / "s.jsonl", [json.dumps({"text": "x" * 10 + str(i)}) for i in range(10)])
    stream = sample_mixture(MixtureSpec([CorpusSource("s", [str(f)], 1.0)], total_bytes=30))
    docs = [d for d, _ in stream]
    assert docs == ["x" * 10 + "0", "x" * 10 + "1", "x" * 10 + "2"]
    assert stream.stats()["s"]["achieved_bytes"] == 33


def test_equal_weights_share_half(tmp_path):
    for name in ("a", "b"):
        topic = "english" if name == "a" else "korean"
        synth.write_jsonl(tmp_path / f"{name}.jsonl", synth.documents(topic, 700_000, seed=1))
    spec = MixtureSpec(
        [CorpusSource("a", [str(tmp_path / "a.jsonl")], 0.5), CorpusSource("b", [str(tmp_path / "b.jsonl")], 0.5)],
        total_bytes=1_000_000,
    )
    stream = sample_mixture(spec)
    total = sum(corpus.doc_bytes(d) * w for d, w in stream)
    assert total >= 1_000_000
    for s in stream.stats().values():
        assert abs(s["achieved_share"] - 0.5) <= 0.05


def test_mixture_shares_and_determinism(desk_mixture):
    spec = MixtureSpec.load(desk_mixture)
    a = list(sample_mixture(spec))
    b = list(sample_mixture(MixtureSpec.load(desk_mixture)))
    assert a == b
    stream = sample_mixture(spec)
    list(stream)
    stats = stream.stats()
    for name, s in stats.items():
        assert abs(s["achieved_share"] / s["normalized_weight"] - 1) <= 0.10, name
        assert s["requested_weight"] == corpus.TABLE1_WEIGHTS[name]


def test_source_exhausted_reports_shares(tmp_path):
    small = write_lines(tmp_path / "small.jsonl", ['{"text":"tiny"}'])
    big = write_lines(tmp_path / "big.jsonl", [json.dumps({"text": "y" * 50})] * 100)
    spec = MixtureSpec([CorpusSource("small", [str(small)], 0.5), CorpusSource("big", [str(big)], 0.5)], 1000)
    with pytest.raises(SourceExhausted) as e:
        list(sample_mixture(spec))
    assert "small" in str(e.value)
    assert e.value.achieved["small"]["achieved_bytes"] == 4


def test_upweight_fills_the_quota(tmp_path):
    small = write_lines(tmp_path / "small.jsonl", ['{"text":"abcd"}'] * 5)
    big = write_lines(tmp_path / "big.jsonl", [json.dumps({"text": "y" * 10})] * 100)
    spec = MixtureSpec(
        [CorpusSource("small", [str(small)], 0.5), CorpusSource("big", [str(big)], 0.5)],
        total_bytes=200,
        on_exhausted="upweight",
    )
    stream = sample_mixture(spec)
    pairs = list(stream)
    small_weights = {w for d, w in pairs if d == "abcd"}
    assert small_weights == {Fraction(100, 20)}
    assert stream.stats()["small"]["achieved_bytes"] == 100


def test_spec_validation_and_round_trip(tmp_path):
    with pytest.raises(ConfigInvalid):
        CorpusSource("a", [], 0.5)
    with pytest.raises(ConfigInvalid):
        CorpusSource("a", ["x"], 1.5)
    with pytest.raises(ConfigInvalid):
        MixtureSpec([CorpusSource("a", ["x"], 1.0)] * 2, 10)
    with pytest.raises(ConfigInvalid):
        MixtureSpec.from_dict({"sources": [{"name": "a"}], "total_bytes": 5})
    spec = MixtureSpec([CorpusSource("a", ["x.jsonl"], 0.3, language="ko", reasoning=True)], 10, seed=4)
    assert MixtureSpec.from_dict(spec.to_dict()) == spec


def test_stream_is_single_use(desk_mixture):
    stream = sample_mixture(MixtureSpec.load(desk_mixture))
    list(stream)
    with pytest.raises(RuntimeError):
        list(stream)


# -----------------------------------------------------------------------------
# sharding


def test_shard_examples():
    sizes = {"a": 8, "b": 6, "c": 3, "d": 3}
    assert shard_files(list(sizes), 0, 1, sizes) == ["a", "b", "c", "d"]
    plan = shard_plan(list(sizes), 2, sizes)
    assert [sorted(sizes[p] for p in shard) for shard in plan] == [[3, 8], [3, 6]]
    assert [sum(sizes[p] for p in shard) for shard in plan] == [11, 9]
    plan = shard_plan(["a", "b"], 4, {"a": 1, "b": 1})
    assert plan.count([]) == 2 and sorted(p for s in plan for p in s) == ["a", "b"]


def test_shard_errors():
    with pytest.raises(InvalidRank):
        shard_files(["a"], 2, 2, {"a": 1})
    with pytest.raises(InvalidRank):
        shard_files(["a"], -1, 2, {"a": 1})
    with pytest.raises(InvalidRank):
        shard_plan(["a"], 0, {"a": 1})


def test_shard_uses_disk_sizes(tmp_path):
    for name, n in (("a", 10), ("b", 7), ("c", 4)):
        (tmp_path / name).write_bytes(b"x" * n)
    paths = [str(tmp_path / n) for n in "abc"]
    assert shard_plan(paths, 2) == [[paths[0]], [paths[1], paths[2]]]


@settings(max_examples=200, deadline=None)
@given(st.dictionaries(st.text("abcdef", min_size=1, max_size=4), st.integers(0, 1000), max_size=30), st.integers(1, 8))
def test_partition_property(sizes, world):
    plan = shard_plan(list(sizes), world, sizes)
    flat = [p for shard in plan for p in shard]
    assert len(flat) == len(set(flat)) and set(flat) == set(sizes)
    assert plan == shard_plan(list(reversed(list(sizes))), world, sizes)


def test_greedy_balance_bound():
    rng = random.Random(0)
    for _ in range(100):
        world = rng.randint(1, 6)
        sizes = {str(i): rng.randint(1, 100) for i in range(rng.randint(1, 30))}
        loads = [sum(sizes[p] for p in s) for s in shard_plan(list(sizes), world, sizes)]
        # classic greedy bound: spread never exceeds the largest file
        assert max(loads) - min(loads) <= max(sizes.values())
