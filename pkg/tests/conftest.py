import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from earkit import Project, load_catalog, load_corpus_dir
from earkit.brat import read_brat_annotations

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def corpus_dir():
    return DATA / "corpus"


@pytest.fixture(scope="session")
def ann_dir():
    return DATA / "ann"


@pytest.fixture(scope="session")
def fixture_texts(corpus_dir):
    texts, _ = load_corpus_dir(corpus_dir)
    return texts


@pytest.fixture(scope="session")
def shopping_text(fixture_texts):
    return next(mt for mt in fixture_texts if mt.id == "micro_f001")


@pytest.fixture()
def fixture_project(fixture_texts, ann_dir, catalog):
    """The fixture corpus with both annotators' standoff annotations."""
    annotations = []
    for annotator in ("ann1", "ann2"):
        for path in sorted((ann_dir / annotator).glob("*.ann")):
            mt = next(t for t in fixture_texts if t.id == path.stem)
            annotations.extend(
                read_brat_annotations(
                    mt, path.read_text(encoding="utf-8"), catalog, annotator=annotator
                )
            )
    return Project(
        corpus=tuple(fixture_texts),
        annotators=("ann1", "ann2"),
        annotations=tuple(annotations),
        split={mt.id: "test" for mt in fixture_texts},
    )
