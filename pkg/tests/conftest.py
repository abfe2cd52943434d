import pytest

from descimg.ingest import parse_score_document

from helpers import FIXTURES, REFERENCE_LABELS


@pytest.fixture
def reference_labels():
    return REFERENCE_LABELS


@pytest.fixture
def reference_matrix():
    m, names, mode = parse_score_document(FIXTURES / "reference_sample.json")
    assert names == list(REFERENCE_LABELS.names) and mode == "softmax"
    return m
