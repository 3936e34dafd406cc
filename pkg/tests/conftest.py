from __future__ import annotations

import pytest

from fixtures_util import make_bundle

ELEMENTS_FIX5 = {
    2: [
        {"kind": "chart", "bbox": [20, 30, 120, 90]},
        {"kind": "table", "bbox": [30, 100, 180, 150]},
    ],
    4: [
        {"kind": "figure", "bbox": [10, 10, 90, 80]},
    ],
}


@pytest.fixture
def fix5(tmp_path):
    """A 5-page bundle with OCR and visual elements on pages 2 and 4."""
    return make_bundle(tmp_path, doc_id="fix5", n_pages=5, elements=ELEMENTS_FIX5)


@pytest.fixture
def fix5_doc(fix5):
    from doclens import load_document

    return load_document(fix5)
