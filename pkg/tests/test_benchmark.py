import json
import random
from fractions import Fraction

import pytest

from bpekit import benchmark
from bpekit.benchmark import (
    BenchmarkReport,
    Row,
    Slice,
    bytes_per_token,
    emit_report,
    format_percent,
    relative_gain,
    run_benchmark,
)
from bpekit.errors import DivideByZero, EmptyCorpus, EmptyEncoding
from bpekit.model import TokenizerModel

ABCD = TokenizerModel(merges=[(b"a", b"b"), (b"c", b"d")])


def chat(think, answer):
    return {"messages": [
        {"role": "user", "segments": [{"type": "text", "text": "question"}]},
        {"role": "assistant", "segments": [{"type": "think", "text": think}, {"type": "text", "text": answer}]},
    ]}


def test_bytes_per_token_examples(toy_model):
    assert bytes_per_token("abc", toy_model) == 3
    assert bytes_per_token("한국", toy_model) == 3
    with pytest.raises(EmptyEncoding):
        bytes_per_token("", toy_model)
    assert isinstance(bytes_per_token(b"xy", toy_model), Fraction)


def test_single_doc_row():
    row = run_benchmark([({}, iter(["abcd"]))], {"m": ABCD}).rows[0]
    assert (row.documents, row.bytes, row.tokens, row.bytes_per_token) == (1, 4, 2, 2)


def test_relative_gain_examples():
    assert relative_gain(Fraction(3), Fraction(3)) == 0
    assert relative_gain(4.69, 3.45) == Fraction(469, 345) - 1
    assert round(float(relative_gain(4.69, 3.45)), 3) == 0.359
    assert round(float(relative_gain(4.69, 3.19)), 3) == 0.470
    assert relative_gain(1, 2) == Fraction(-1, 2)
    with pytest.raises(DivideByZero):
        relative_gain(1, 0)


@pytest.mark.parametrize(
    "gain, decimals, text",
    [(0.35942, 1, "+35.9%"), (0.0, 1, "0.0%"), (-0.125, 1, "-12.5%"), (0.0049, 0, "0%"), (0.005, 0, "+1%"),
     (Fraction(1, 8), 2, "+12.50%")],
)
def test_format_percent(gain, decimals, text):
    assert format_percent(gain, decimals) == text


def test_sample_cap_and_empty_corpus():
    docs = ["ab", "cd", "xyz"]
    row = run_benchmark([({}, iter(docs))], {"m": ABCD}, sample_cap=2).rows[0]
    assert (row.documents, row.bytes, row.tokens) == (2, 4, 2)
    with pytest.raises(EmptyCorpus):
        run_benchmark([({"language": "ko"}, iter([]))], {"m": ABCD})
    with pytest.raises(EmptyEncoding):
        run_benchmark([({}, iter([""]))], {"m": ABCD})


def test_reasoning_slices_measure_assistant_outputs(toy_model):
    model = TokenizerModel(merges=toy_model.merges, specials=["<|think|>", "<|/think|>"])
    doc = chat("abc abc", "한국")
    with_think = run_benchmark([({"reasoning": "true"}, iter([doc]))], {"t": model}).rows[0]
    without = run_benchmark([({"reasoning": "false"}, iter([doc]))], {"t": model}).rows[0]
    # "<|think|>abc abc<|/think|>한국": two specials, abc, " abc" -> " ", "abc", then 한, 국
    assert (with_think.bytes, with_think.tokens) == (len("<|think|>abc abc<|/think|>한국".encode()), 7)
    assert (without.bytes, without.tokens) == (6, 2)


def test_order_invariance(desk_model):
    rng = random.Random(1)
    docs = ["".join(rng.choice("ab 한국어\n12") for _ in range(rng.randint(1, 40))) for _ in range(60)]
    shuffled = docs[:]
    rng.shuffle(shuffled)
    a = run_benchmark([({}, iter(docs))], {"m": desk_model}).rows[0]
    b = run_benchmark([({}, iter(shuffled))], {"m": desk_model}).rows[0]
    assert a.bytes_per_token == b.bytes_per_token


def test_jobs_match_serial(desk_model):
    corpora = [({"language": "en"}, ["hello world"] * 5), ({"language": "ko"}, ["안녕하세요 세계"] * 5)]
    models = {"a": desk_model, "b": ABCD}
    serial = run_benchmark([(t, iter(d)) for t, d in corpora], models)
    parallel = run_benchmark([(t, iter(d)) for t, d in corpora], models, jobs=2)
    assert serial == parallel


def test_gains_against_measured_and_reported(toy_model):
    base = {"ref-x": {"language=ko": 1.5, "vocab_size": 10}}
    report = run_benchmark([({"language": "ko"}, iter(["한국"]))], {"toy": toy_model, "abcd": ABCD}, baselines=base)
    gains = {(g.tokenizer, g.baseline): g.relative_gain for g in report.gains}
    assert gains[("toy", "ref-x")] == pytest.approx(1.0)
    assert gains[("toy", "abcd")] == pytest.approx(2.0)
    assert gains[("abcd", "toy")] == pytest.approx(-2 / 3)


def test_builtin_baselines():
    base = benchmark.load_baselines()
    assert base["ref-target"]["language=ko;reasoning=false"] == 4.69
    assert all("vocab_size" in v for v in base.values())


def test_csv_and_json_output(tmp_path):
    report = run_benchmark([({"language": "ko", "reasoning": "false"}, iter(["abcd"]))], {"m": ABCD})
    csv = emit_report(report, "csv")
    lines = csv.splitlines()
    assert len(lines) == 2
    assert lines[0] == ",".join(benchmark.CSV_COLUMNS)
    assert lines[1] == "m,,ko,false,1,4,2,2.000000"
    assert benchmark.parse_csv(csv) == report.rows

    path = tmp_path / "r.json"
    text = emit_report(report, "json", path)
    assert path.read_text() == text
    assert BenchmarkReport.from_dict(json.loads(text)) == report
    with pytest.raises(ValueError):
        emit_report(report, "xml")


def test_json_keeps_exact_fraction(toy_model):
    report = run_benchmark([({}, iter(["abc" * 10, "xy"]))], {"t": toy_model})
    back = BenchmarkReport.from_dict(json.loads(emit_report(report)))
    assert back.rows[0].bytes_per_token == Fraction(8, 3)


def test_slice_keys():
    s = Slice(language="ko", reasoning=False)
    assert s.key() == "language=ko;reasoning=false"
    assert Slice.from_key(s.key()) == s
    assert Slice.from_tags({"reasoning": "TRUE"}).reasoning is True
    with pytest.raises(ValueError):
        Slice.from_tags({"lang": "ko"})
    with pytest.raises(ValueError):
        Slice.from_tags({"reasoning": "maybe"})
    assert Row("t", s, 1, 7, 2).bytes_per_token == Fraction(7, 2)
