import os

import pytest
from hypothesis import settings

from dysaug.synth import make_corpus

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Synthetic miniature corpus written once per session."""
    root = tmp_path_factory.mktemp("corpus")
    return make_corpus(str(root), seed=0)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, desc, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {desc}: {detail}")
