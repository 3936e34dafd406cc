"""Build the bundle, mock script, and serve config for the UI tests.

Usage: python3 make_fixture.py <target-dir>
Prints a JSON object with the bundle path and scripted expectations.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "tests"))

from doclens import load_document  # noqa: E402
from doclens.navigator import NavigatorConfig  # noqa: E402
from doclens.pipeline import PipelineConfig  # noqa: E402
from doclens.reasoning import ReasonerConfig  # noqa: E402
from fixtures_util import make_bundle, write_script  # noqa: E402
from pipeline_helpers import plan_run  # noqa: E402

QUESTION = "How many widgets are in the chart?"
ELEMENTS = {
    2: [
        {"kind": "chart", "bbox": [20, 30, 120, 90]},
        {"kind": "table", "bbox": [30, 100, 180, 150]},
    ],
    4: [
        {"kind": "figure", "bbox": [10, 10, 90, 80]},
    ],
}


def main() -> None:
    target = Path(sys.argv[1])
    target.mkdir(parents=True, exist_ok=True)
    bundle = make_bundle(target, doc_id="uifix", n_pages=5, elements=ELEMENTS)
    doc = load_document(bundle)
    cfg = PipelineConfig(
        navigator=NavigatorConfig(t_e=2), reasoner=ReasonerConfig(t_a=2),
    )
    entries, final = plan_run(
        doc, QUESTION, cfg,
        nav_samples=[[2], [2, 4]], answers=["14", "12"], adjudicator_pick="14",
    )
    write_script(target / "script.json", entries)
    (target / "serve.toml").write_text(
        '[navigator]\nt_e = 2\n\n[reasoner]\nt_a = 2\n\n'
        '[gateway]\nbackend = "mock"\nmock_script = "script.json"\n',
        encoding="utf-8",
    )
    print(json.dumps({
        "bundle": str(bundle),
        "config": str(target / "serve.toml"),
        "question": QUESTION,
        "expected_final": final,
        "expected_e_pred": [2, 4],
    }))


if __name__ == "__main__":
    main()
