import dataclasses
import json
import threading

import pytest
from fastapi.testclient import TestClient

from earkit import Project, save_project
from earkit.corpus import CrossCheckResponse, annotation_to_dict
from earkit.service import (
    ProjectStore,
    StageIncompleteError,
    advance_stage,
    build_queue,
    create_app,
    visible_project,
)


def make_store(tmp_path, project, tokens=None):
    store_dir = tmp_path / "store"
    store_dir.mkdir()
    save_project(project, store_dir / "demo.json")
    if tokens:
        (store_dir / "tokens.json").write_text(json.dumps(tokens), encoding="utf-8")
    return ProjectStore(store_dir)


@pytest.fixture()
def bare_project(fixture_project):
    """Corpus and annotators, but no annotations yet."""
    return dataclasses.replace(
        fixture_project, annotations=(), cross_checks=(), resolutions=()
    )


def annotation_payload(mt, rel_id, pattern_id, annotator, fills=(), note=None):
    from earkit import EarAnnotation

    return annotation_to_dict(
        EarAnnotation(
            relation_id=f"{mt.id}/{rel_id}",
            annotator=annotator,
            stage=1,
            pattern_id=pattern_id,
            fills=tuple(fills),
            note=note,
        )
    )


def span_fill(mt, slot, segment_id, needle):
    from earkit import SlotFill, Span

    seg = mt.segment(segment_id)
    start = mt.text.index(needle, seg.start)
    return SlotFill(slot, (Span(segment_id, start, start + len(needle)),), needle)


def r03_fills(mt):
    return [
        span_fill(mt, "x", "e1", "be able to shop on weekends"),
        span_fill(mt, "y", "e2", "other people have to work"),
    ]


class TestCatalogAndProjects:
    def test_catalog_has_full_pattern_set(self, bare_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        body = client.get("/catalog").json()
        assert len(body["patterns"]) == 35
        ids = {p["id"] for p in body["patterns"]}
        assert "OTHER" in ids and "R03" in ids

    def test_project_listing(self, bare_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        body = client.get("/projects").json()
        assert [p["id"] for p in body["projects"]] == ["demo"]
        assert body["projects"][0]["texts"] == 3

    def test_missing_project_404(self, bare_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        response = client.get("/projects/nope")
        assert response.status_code == 404
        assert isinstance(response.json()["detail"], list)


class TestAnnotationSubmission:
    def test_valid_annotation_accepted_and_durable(self, bare_project, tmp_path, shopping_text):
        store = make_store(tmp_path, bare_project)
        client = TestClient(create_app(store))
        payload = annotation_payload(
            shopping_text, "c1", "R03", "ann1", r03_fills(shopping_text)
        )
        response = client.post(
            "/projects/demo/annotations",
            json={"revision": 0, "annotation": payload},
        )
        assert response.status_code == 200, response.text
        assert response.json()["revision"] == 1
        # a fresh store handle sees the write: it hit disk before the ack
        fresh = ProjectStore(store.root).load("demo")
        assert len(fresh.annotations) == 1
        assert fresh.revision == 1

    def test_type_mismatch_rejected_with_diagnostics(
        self, bare_project, tmp_path, fixture_texts
    ):
        mt = next(t for t in fixture_texts if t.id == "micro_f002")
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        payload = annotation_payload(
            mt,
            "c1",  # support relation; R03 explains rebuttals
            "R03",
            "ann1",
            [
                span_fill(mt, "x", "e1", "Waste separation"),
                span_fill(mt, "y", "e2", "Recycling"),
            ],
        )
        response = client.post(
            "/projects/demo/annotations", json={"revision": 0, "annotation": payload}
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert any(d["code"] == "pattern-relation-mismatch" for d in detail)

    def test_stale_revision_rejected_never_merged(
        self, bare_project, tmp_path, shopping_text
    ):
        store = make_store(tmp_path, bare_project)
        client = TestClient(create_app(store))
        payload = annotation_payload(
            shopping_text, "c1", "R03", "ann1", r03_fills(shopping_text)
        )
        ok = client.post(
            "/projects/demo/annotations", json={"revision": 0, "annotation": payload}
        )
        assert ok.status_code == 200
        stale = client.post(
            "/projects/demo/annotations",
            json={
                "revision": 0,
                "annotation": annotation_payload(shopping_text, "c2", "OTHER", "ann2"),
            },
        )
        assert stale.status_code == 409
        assert len(store.load("demo").annotations) == 1

    def test_unknown_annotator_rejected(self, bare_project, tmp_path, shopping_text):
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        payload = annotation_payload(
            shopping_text, "c1", "R03", "ghost", r03_fills(shopping_text)
        )
        response = client.post(
            "/projects/demo/annotations", json={"revision": 0, "annotation": payload}
        )
        assert response.status_code == 422

    def test_warning_diagnostics_returned_on_accept(
        self, bare_project, tmp_path, shopping_text
    ):
        client = TestClient(create_app(make_store(tmp_path, bare_project)))
        fills = [
            span_fill(shopping_text, "x", "e1", "be able to shop on weekends"),
            span_fill(shopping_text, "y", "e3", "days off"),  # adjacent segment
        ]
        payload = annotation_payload(shopping_text, "c1", "R03", "ann1", fills)
        response = client.post(
            "/projects/demo/annotations", json={"revision": 0, "annotation": payload}
        )
        assert response.status_code == 200
        assert any(
            d["code"] == "outside-participants" for d in response.json()["diagnostics"]
        )

    def test_concurrent_writers_are_linearized(self, bare_project, tmp_path, shopping_text):
        store = make_store(tmp_path, bare_project)
        app = create_app(store)
        results = []

        def submit(annotator, rel):
            client = TestClient(app)
            for _ in range(10):  # optimistic retry
                revision = store.load("demo").revision
                payload = annotation_payload(shopping_text, rel, "OTHER", annotator)
                r = client.post(
                    "/projects/demo/annotations",
                    json={"revision": revision, "annotation": payload},
                )
                if r.status_code == 200:
                    results.append(r.json()["revision"])
                    return
            raise AssertionError("never accepted")

        threads = [
            threading.Thread(target=submit, args=("ann1", "c1")),
            threading.Thread(target=submit, args=("ann2", "c2")),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        final = store.load("demo")
        assert len(final.annotations) == 2
        assert sorted(results) == [1, 2]


class TestBlindness:
    def test_stage1_queue_never_contains_counterpart(self, fixture_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, fixture_project)))
        body = client.get(
            "/projects/demo/queue", params={"annotator": "ann1", "stage": 1}
        )
        text = body.text
        # ann2 chose R04 on c1 and OTHER on c2; neither may leak into ann1's queue
        assert "R04" not in text
        assert body.status_code == 200

    def test_filtered_project_view(self, fixture_project, catalog):
        view = visible_project(fixture_project, catalog, "ann1")
        own = [a for a in view.annotations if a.annotator == "ann1"]
        others = [a for a in view.annotations if a.annotator == "ann2"]
        assert len(own) == 2
        # c1 agreed at stage 1: ann2's R04 stays hidden; c2 disagreed: exposed
        assert [a.pattern_id for a in others] == ["OTHER"]

    def test_pending_relation_fully_blind(self, bare_project, tmp_path, shopping_text):
        store = make_store(tmp_path, bare_project)
        client = TestClient(create_app(store))
        payload = annotation_payload(
            shopping_text, "c1", "R03", "ann1", r03_fills(shopping_text)
        )
        client.post(
            "/projects/demo/annotations", json={"revision": 0, "annotation": payload}
        )
        app_view = client.get("/projects/demo").json()
        # open mode (no tokens): the unfiltered admin view does contain it;
        # the filtered view for ann2 must not
        from earkit.patterns import load_catalog

        project = store.load("demo")
        filtered = visible_project(project, load_catalog(), "ann2")
        assert all(a.annotator == "ann2" for a in filtered.annotations)
        assert "R03" in json.dumps(app_view)

    def test_stage2_item_exposes_exactly_counterpart(self, fixture_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, fixture_project)))
        body = client.get(
            "/projects/demo/queue", params={"annotator": "ann1", "stage": 2}
        ).json()
        items = body["items"]
        assert [i["relation_id"] for i in items] == ["micro_f001/c2"]
        counterpart = items[0]["counterpart"]
        assert counterpart["annotator"] == "ann2"
        assert counterpart["pattern_id"] == "OTHER"


class TestTokens:
    def test_token_required_when_configured(self, fixture_project, tmp_path):
        store = make_store(
            tmp_path, fixture_project, tokens={"t1": "ann1", "t2": "ann2"}
        )
        client = TestClient(create_app(store))
        assert client.get("/projects").status_code == 401
        assert (
            client.get("/projects", headers={"X-Annotator-Token": "t1"}).status_code
            == 200
        )

    def test_queue_for_other_annotator_forbidden(self, fixture_project, tmp_path):
        store = make_store(
            tmp_path, fixture_project, tokens={"t1": "ann1", "t2": "ann2"}
        )
        client = TestClient(create_app(store))
        response = client.get(
            "/projects/demo/queue",
            params={"annotator": "ann2", "stage": 1},
            headers={"X-Annotator-Token": "t1"},
        )
        assert response.status_code == 403

    def test_project_view_filtered_by_token_identity(self, fixture_project, tmp_path):
        store = make_store(
            tmp_path, fixture_project, tokens={"t1": "ann1", "t2": "ann2"}
        )
        client = TestClient(create_app(store))
        body = client.get(
            "/projects/demo", headers={"X-Annotator-Token": "t1"}
        ).json()
        assert "R04" not in json.dumps(body)


class TestWorkflow:
    def test_advance_stage_agreed_spawns_nothing(self, fixture_project, catalog):
        assert advance_stage(fixture_project, catalog, "micro_f001/c1") == ()

    def test_advance_stage_disagreed_spawns_two_crosschecks(
        self, fixture_project, catalog
    ):
        items = advance_stage(fixture_project, catalog, "micro_f001/c2")
        assert len(items) == 2
        assert {i.annotator for i in items} == {"ann1", "ann2"}
        assert all(i.stage == 2 and i.status == "pending" for i in items)

    def test_advance_stage_both_no_spawns_one_discussion(self, fixture_project, catalog):
        project = dataclasses.replace(
            fixture_project,
            cross_checks=(
                CrossCheckResponse("micro_f001/c2", "ann1", "no"),
                CrossCheckResponse("micro_f001/c2", "ann2", "no"),
            ),
        )
        items = advance_stage(project, catalog, "micro_f001/c2")
        assert len(items) == 1
        assert items[0].stage == 3 and items[0].annotator == ""

    def test_advance_stage_incomplete_raises(self, bare_project, catalog):
        with pytest.raises(StageIncompleteError):
            advance_stage(bare_project, catalog, "micro_f001/c1")

    def test_full_http_workflow(self, bare_project, tmp_path, fixture_texts):
        store = make_store(tmp_path, bare_project)
        client = TestClient(create_app(store))
        f001 = next(t for t in fixture_texts if t.id == "micro_f001")

        def post(path, body):
            r = client.post(f"/projects/demo{path}", json=body)
            assert r.status_code == 200, r.text
            return r.json()

        rev = 0
        # both annotators blind-annotate the rebuttal, disagreeing
        rev = post(
            "/annotations",
            {
                "revision": rev,
                "annotation": annotation_payload(f001, "c1", "R03", "ann1", r03_fills(f001)),
            },
        )["revision"]
        rev = post(
            "/annotations",
            {"revision": rev, "annotation": annotation_payload(f001, "c1", "OTHER", "ann2")},
        )["revision"]

        queue = client.get(
            "/projects/demo/queue", params={"annotator": "ann2", "stage": 2}
        ).json()["items"]
        assert [i["relation_id"] for i in queue] == ["micro_f001/c1"]

        # ann2 accepts ann1's reading; ann1 rejects ann2's
        rev = post(
            "/crosschecks",
            {"revision": rev, "relation_id": "micro_f001/c1", "annotator": "ann2", "response": "yes"},
        )["revision"]
        rev = post(
            "/crosschecks",
            {"revision": rev, "relation_id": "micro_f001/c1", "annotator": "ann1", "response": "no"},
        )["revision"]

        report = client.get("/projects/demo/report").json()
        assert report["stages"][1]["settled"] == 1
        assert report["stages"][1]["coverage"]["covered"] == 1  # settled on R03

        # the undercut: both pick different patterns and stand firm
        rev = post(
            "/annotations",
            {"revision": rev, "annotation": annotation_payload(f001, "c2", "OTHER", "ann1")},
        )["revision"]
        from earkit import SlotFill

        u09 = annotation_payload(f001, "c2", "U09", "ann2")
        u09["fills"] = [
            {"slot": "q", "spans": [], "text": "all other employees", "implicit": True}
        ]
        rev = post("/annotations", {"revision": rev, "annotation": u09})["revision"]
        for annotator in ("ann1", "ann2"):
            rev = post(
                "/crosschecks",
                {"revision": rev, "relation_id": "micro_f001/c2", "annotator": annotator, "response": "no"},
            )["revision"]

        stage3 = client.get(
            "/projects/demo/queue", params={"annotator": "ann1", "stage": 3}
        ).json()["items"]
        assert [i["relation_id"] for i in stage3] == ["micro_f001/c2"]
        assert len(stage3[0]["annotations"]) == 2

        body = post(
            "/resolutions",
            {
                "revision": rev,
                "relation_id": "micro_f001/c2",
                "stage": 3,
                "decision": "accept",
                "accepted_annotator": "ann2",
            },
        )
        assert body["resolution"]["outcome"] == "semi_agreed"

        report = client.get("/projects/demo/report").json()
        assert report["stages"][2]["settled"] == 2
        assert report["compared"] == 2

        distributions = client.get(
            "/projects/demo/distributions", params={"stage": 3}
        ).json()
        pattern_rows = {
            (r["group"], r["label"]): r["counts"]
            for r in distributions["pattern"]["rows"]
        }
        assert pattern_rows[("rebuttal", "R03")] == [1]
        assert pattern_rows[("undercut", "U09")] == [1]

    def test_duplicate_crosscheck_conflict(self, fixture_project, tmp_path):
        store = make_store(tmp_path, fixture_project)
        client = TestClient(create_app(store))
        first = client.post(
            "/projects/demo/crosschecks",
            json={
                "revision": 0,
                "relation_id": "micro_f001/c2",
                "annotator": "ann1",
                "response": "no",
            },
        )
        assert first.status_code == 200
        dup = client.post(
            "/projects/demo/crosschecks",
            json={
                "revision": 1,
                "relation_id": "micro_f001/c2",
                "annotator": "ann1",
                "response": "yes",
            },
        )
        assert dup.status_code == 409

    def test_crosscheck_on_agreed_relation_rejected(self, fixture_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, fixture_project)))
        response = client.post(
            "/projects/demo/crosschecks",
            json={
                "revision": 0,
                "relation_id": "micro_f001/c1",
                "annotator": "ann1",
                "response": "yes",
            },
        )
        assert response.status_code == 422

    def test_resolution_requires_pending_discussion(self, fixture_project, tmp_path):
        client = TestClient(create_app(make_store(tmp_path, fixture_project)))
        response = client.post(
            "/projects/demo/resolutions",
            json={
                "revision": 0,
                "relation_id": "micro_f001/c2",
                "stage": 3,
                "decision": "reject",
            },
        )
        assert response.status_code == 422
