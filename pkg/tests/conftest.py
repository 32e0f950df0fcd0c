import json

import pytest

from apes_eval import corpus

FIG_DOC = {
    "id": "fig2",
    "source": (
        "Arsenal beat Burnley 1-0 in the EPL . "
        "a goal from Aaron Ramsey secured all three points . "
        "win cuts Chelsea 's EPL lead to four points ."
    ),
    "highlights": [
        "Arsenal beat Burnley 1-0 in the EPL .",
        "a goal from Aaron Ramsey secured all three points .",
        "win cuts Chelsea 's EPL lead to four points .",
    ],
    "entities": [
        {"id": 0, "surfaces": ["Arsenal"]},
        {"id": 1, "surfaces": ["Burnley"]},
        {"id": 2, "surfaces": ["EPL"]},
        {"id": 3, "surfaces": ["Aaron Ramsey"]},
        {"id": 4, "surfaces": ["Chelsea"]},
    ],
}


@pytest.fixture
def fig_doc() -> corpus.Document:
    return corpus.parse_document(json.loads(json.dumps(FIG_DOC)))


def write_jsonl(path, objects) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        for obj in objects:
            handle.write(json.dumps(obj) + "\n")
    return str(path)
