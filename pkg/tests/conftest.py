import pytest

from bpekit import corpus, synth
from bpekit.model import TokenizerModel
from bpekit.trainer import TrainerConfig, train

_acceptance: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion reported in the summary")


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        label = report.user_properties and dict(report.user_properties).get("acceptance")
        if label:
            _acceptance[label] = ("PASS" if report.outcome == "passed" else "FAIL", report.nodeid)


@pytest.fixture(autouse=True)
def _tag_acceptance(request):
    marker = request.node.get_closest_marker("acceptance")
    if marker:
        request.node.user_properties.append(("acceptance", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split()[0].lstrip("AC"))):
        outcome, nodeid = _acceptance[label]
        terminalreporter.write_line(f"{outcome}  {label}")


@pytest.fixture(scope="session")
def desk_mixture(tmp_path_factory):
    """~1 MB Table-1-weighted synthetic mixture on disk."""
    return synth.write_mixture(tmp_path_factory.mktemp("desk"), 1_000_000)


@pytest.fixture(scope="session")
def desk_model(desk_mixture) -> TokenizerModel:
    spec = corpus.MixtureSpec.load(desk_mixture)
    return train(corpus.sample_mixture(spec), TrainerConfig(target_vocab=4096))


@pytest.fixture
def toy_model() -> TokenizerModel:
    """Hand-built merges: ab, abc, and the full UTF-8 forms of 한 and 국."""
    return TokenizerModel(
        merges=[
            (b"a", b"b"),
            (b"ab", b"c"),
            (b"\xed", b"\x95"),
            (b"\xed\x95", b"\x9c"),
            (b"\xea", b"\xb5"),
            (b"\xea\xb5", b"\xad"),
        ],
        specials=["<|think|>"],
    )
