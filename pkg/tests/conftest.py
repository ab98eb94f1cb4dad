import numpy as np
import pytest

from seqedit.align import AlignConfig, init_bundle
from seqedit.editor import EditorConfig, init_editor
from seqedit.encoders import EncoderConfig
from seqedit.tokenize import build_text_vocab

TEXTS = ["high alanine content", "high glycine content, short length", "low charge"]


def make_bundle(dtype="float64", fusion="film", d=16, layers=1, editor=True, seed=0, protein_max_len=40):
    cfg = AlignConfig(
        protein=EncoderConfig(layers=layers, model_dim=d, heads=2, max_len=protein_max_len, projection_dim=8),
        text=EncoderConfig(layers=layers, model_dim=d, heads=2, max_len=12, projection_dim=8),
        dtype=dtype,
    )
    bundle = init_bundle(cfg, build_text_vocab(TEXTS, 50), seed)
    if editor:
        ecfg = EditorConfig(layers=layers, heads=2, fusion=fusion, max_len=protein_max_len + 16)
        init_editor(bundle, ecfg, seed + 1)
        # FiLM starts at identity; jitter it so the text actually matters in tests
        if fusion == "film":
            rng = np.random.default_rng(seed + 2)
            for p in bundle.editor.fusion.parameters():
                p.data += rng.normal(0, 0.3, p.shape).astype(p.dtype)
    return bundle


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def bundle64():
    return make_bundle("float64")


@pytest.fixture(scope="session")
def bundle64_concat():
    return make_bundle("float64", fusion="concat")


# -- acceptance summary --------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number: int, passed: bool, title: str, detail: str = "") -> None:
    ACCEPTANCE[number] = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title}" + (f" [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
