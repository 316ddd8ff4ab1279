import shutil

import pytest

from Config import DevConfig
from src.s1_aop_frontend import load_program
from src.s2_weaver import weave
from src.s3_flowgraph import build_cfg
from src.s4_kripke_model import from_cfg
from src.utils import corpus_props, corpus_sources, get_data_dir

HISTORY = DevConfig.TRACE_TARGET  # HealthService.requestHistory

# Corpus file of each aspect
ASPECT_FILES = {
    "AccessControl": "access_control.osm",
    "DataPrivacy": "data_privacy.osm",
    "Encryption": "encryption.osm",
    "HealthSupport": "health_support.osm",
    "Logging": "logging.osm",
    "VaccineManagement": "vaccine_management.osm",
}
PRECEDENCE = ("AccessControl", "Logging", "Encryption")


@pytest.fixture
def corpus_dir():
    return corpus_sources()[0]


@pytest.fixture
def props_path():
    return corpus_props()


@pytest.fixture
def traces_dir():
    return get_data_dir(DevConfig.DIR_NAME_RAW) / DevConfig.DIR_TRACES


@pytest.fixture
def corpus_program(corpus_dir):
    return load_program([corpus_dir])


@pytest.fixture
def corpus_woven(corpus_program):
    return weave(corpus_program)


@pytest.fixture
def history_cfg(corpus_woven):
    return build_cfg(corpus_woven, HISTORY)


@pytest.fixture
def history_model(history_cfg):
    return from_cfg(history_cfg)


@pytest.fixture
def edited_corpus(tmp_path, corpus_dir):
    """
    Copy of the corpus without the given aspects; the precedence directive is rewritten to list only
    the remaining ones.
    """
    def _edit(*removed):
        target = tmp_path / "corpus"
        shutil.copytree(corpus_dir, target)
        for name in removed:
            (target / ASPECT_FILES[name]).unlink()
        kept = [name for name in PRECEDENCE if name not in removed]
        precedence = target / "precedence.osm"
        if kept:
            precedence.write_text("precedence " + ", ".join(kept) + ";\n", encoding="utf-8")
        else:
            precedence.unlink()
        return target

    return _edit
