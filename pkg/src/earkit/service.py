"""HTTP service for interactive annotation.

Serves projects from a directory of JSON project files, hands out
per-stage work queues, accepts annotations, cross-check responses, and
adjudications, and exposes the agreement report and distribution
tables.

Concurrency contract: reads see consistent snapshots; all writes to one
project run under a per-project lock and carry an optimistic revision
number. A submission against a stale revision is rejected with 409,
never merged. Accepted writes are fsynced before the response goes
out.

Stage-1 blindness is enforced server side: whatever identity a request
carries, queue items and filtered project views never include the
counterpart's stage-1 annotations, except on relations that have
reached the cross-check stage.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from pydantic import BaseModel

from .agreement import (
    AgreementVerdict,
    DiscussionOutcome,
    agreement_report,
    compare_stage1,
    resolve_stage2,
    resolve_stage3,
    run_pipeline,
)
from .corpus import (
    CrossCheckResponse,
    Diagnostic,
    EarAnnotation,
    Project,
    Resolution,
    annotation_from_dict,
    annotation_to_dict,
    load_project,
    project_to_dict,
    save_project,
    validate_annotation,
)
from .patterns import Catalog, load_catalog, pattern_to_dict
from .reporting import pattern_distribution, relation_distribution


class StaleRevisionError(Exception):
    def __init__(self, current: int, submitted: int):
        super().__init__(f"stale revision {submitted}, store is at {current}")
        self.current = current
        self.submitted = submitted


class StageIncompleteError(Exception):
    pass


@dataclass(frozen=True)
class WorkItem:
    relation_id: str
    text_id: str
    stage: int
    annotator: str  # "" for the joint stage-3 discussion item
    status: str  # "pending" | "done"

    def to_dict(self) -> dict:
        return {
            "relation_id": self.relation_id,
            "text_id": self.text_id,
            "stage": self.stage,
            "annotator": self.annotator,
            "status": self.status,
        }


class ProjectStore:
    """Directory of project files with serialized, versioned writes."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"project store {self.root} is not a directory")
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, project_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(project_id, threading.Lock())

    def path_for(self, project_id: str) -> Path:
        if "/" in project_id or project_id.startswith("."):
            raise KeyError(project_id)
        return self.root / f"{project_id}.json"

    def list_ids(self) -> list[str]:
        return sorted(
            p.stem for p in self.root.glob("*.json") if p.stem != "tokens"
        )

    def exists(self, project_id: str) -> bool:
        return self.path_for(project_id).is_file()

    def load(self, project_id: str) -> Project:
        path = self.path_for(project_id)
        if not path.is_file():
            raise KeyError(project_id)
        return load_project(path)

    def update(
        self,
        project_id: str,
        expected_revision: int,
        mutate: Callable[[Project], Project],
    ) -> Project:
        with self._lock_for(project_id):
            project = self.load(project_id)
            if project.revision != expected_revision:
                raise StaleRevisionError(project.revision, expected_revision)
            updated = replace(mutate(project), revision=project.revision + 1)
            save_project(updated, self.path_for(project_id))
            return updated

    def tokens(self) -> dict[str, str]:
        """Optional shared-token map (token -> annotator id, or "*")."""
        path = self.root / "tokens.json"
        if not path.is_file():
            return {}
        import json

        return json.loads(path.read_text(encoding="utf-8"))


def stage1_verdicts(project: Project, catalog: Catalog) -> dict[str, AgreementVerdict]:
    """Verdicts for relations both annotators have blind-annotated."""
    pipeline = run_pipeline(project, catalog)
    return dict(pipeline.stages[1].verdicts)


def advance_stage(project: Project, catalog: Catalog, relation_id: str) -> tuple[WorkItem, ...]:
    """Work items the given relation still needs, beyond stage 1.

    A stage-1 disagreement yields the two cross-check items; a relation
    still open after complete cross-checks yields the single joint
    discussion item. Raises when the prior stage is incomplete.
    """
    mt, _ = project.resolve_relation(relation_id)
    if len(project.annotators) < 2:
        raise StageIncompleteError("project needs two annotators")
    pair = tuple(project.annotators[:2])
    annos = {
        a.annotator: a
        for a in project.annotations
        if a.relation_id == relation_id and a.stage == 1 and a.annotator in pair
    }
    if set(annos) != set(pair):
        raise StageIncompleteError(f"{relation_id}: stage 1 incomplete")
    verdict = compare_stage1(annos[pair[0]], annos[pair[1]], catalog)
    if verdict is AgreementVerdict.AGREED:
        return ()

    responses = {
        c.annotator: c for c in project.cross_checks if c.relation_id == relation_id
    }
    if set(responses) != set(pair):
        return tuple(
            WorkItem(
                relation_id,
                mt.id,
                2,
                annot,
                "done" if annot in responses else "pending",
            )
            for annot in pair
        )
    after2 = resolve_stage2({relation_id: verdict}, responses.values())[relation_id]
    if after2 is AgreementVerdict.SEMI_AGREED:
        return ()
    resolved = any(
        r.relation_id == relation_id and r.stage == 3 for r in project.resolutions
    )
    return (WorkItem(relation_id, mt.id, 3, "", "done" if resolved else "pending"),)


def build_queue(
    project: Project, catalog: Catalog, annotator: str, stage: int
) -> list[WorkItem]:
    """The per-annotator work queue for one stage, sorted by relation."""
    items: list[WorkItem] = []
    if stage == 1:
        done = {
            a.relation_id
            for a in project.annotations
            if a.stage == 1 and a.annotator == annotator
        }
        for key in sorted(project.relation_keys()):
            text_id = key.partition("/")[0]
            status = "done" if key in done else "pending"
            items.append(WorkItem(key, text_id, 1, annotator, status))
        return items

    verdicts = stage1_verdicts(project, catalog)
    if stage == 2:
        responded = {
            c.relation_id for c in project.cross_checks if c.annotator == annotator
        }
        for key in sorted(verdicts):
            if verdicts[key] is not AgreementVerdict.DISAGREED:
                continue
            text_id = key.partition("/")[0]
            status = "done" if key in responded else "pending"
            items.append(WorkItem(key, text_id, 2, annotator, status))
        return items

    if stage == 3:
        responses = list(project.cross_checks)
        after2 = resolve_stage2(verdicts, responses, strict=False)
        resolved = {r.relation_id for r in project.resolutions if r.stage == 3}
        for key in sorted(after2):
            if after2[key] not in (AgreementVerdict.DISAGREED, AgreementVerdict.UNRESOLVED):
                continue
            if verdicts[key] is not AgreementVerdict.DISAGREED:
                continue
            # only relations whose cross-checks are complete reach discussion
            have = {c.annotator for c in responses if c.relation_id == key}
            if set(project.annotators[:2]) - have:
                continue
            text_id = key.partition("/")[0]
            status = "done" if key in resolved else "pending"
            items.append(WorkItem(key, text_id, 3, "", status))
        return items

    raise ValueError(f"unknown stage {stage!r}")


def crosscheck_exposure(project: Project, catalog: Catalog, annotator: str) -> set[str]:
    """Relations whose counterpart annotation this annotator may see."""
    verdicts = stage1_verdicts(project, catalog)
    return {key for key, v in verdicts.items() if v is not AgreementVerdict.AGREED}


def visible_project(project: Project, catalog: Catalog, annotator: str | None) -> Project:
    """Hide the counterpart's stage-1 annotations where stage 1 is still blind."""
    if annotator is None or annotator == "*":
        return project
    exposed = crosscheck_exposure(project, catalog, annotator)
    kept = tuple(
        a
        for a in project.annotations
        if a.annotator == annotator or a.stage != 1 or a.relation_id in exposed
    )
    return replace(project, annotations=kept)


def _http_diags(status: int, diags: list[Diagnostic]) -> HTTPException:
    return HTTPException(status_code=status, detail=[d.to_dict() for d in diags])


def _error(status: int, code: str, message: str) -> HTTPException:
    return _http_diags(status, [Diagnostic("error", code, message)])


class AnnotationSubmission(BaseModel):
    revision: int
    annotation: dict


class CrossCheckSubmission(BaseModel):
    revision: int
    relation_id: str
    annotator: str
    response: str


class ResolutionSubmission(BaseModel):
    revision: int
    relation_id: str
    stage: int = 3
    decision: str
    accepted_annotator: str | None = None
    rng_seed: int | None = None


def create_app(store: ProjectStore, catalog: Catalog | None = None) -> FastAPI:
    catalog = catalog or load_catalog()
    app = FastAPI(title="ear annotation service")
    tokens = store.tokens()

    def identity(x_annotator_token: str | None = Header(default=None)) -> str | None:
        if not tokens:
            return None
        if x_annotator_token is None or x_annotator_token not in tokens:
            raise _error(401, "unauthorized", "missing or unknown annotator token")
        return tokens[x_annotator_token]

    def get_project_or_404(project_id: str) -> Project:
        try:
            return store.load(project_id)
        except KeyError:
            raise _error(404, "not-found", f"no project {project_id!r}") from None

    def require_self(who: str | None, annotator: str) -> None:
        if who is not None and who != "*" and who != annotator:
            raise _error(403, "forbidden", f"token does not belong to {annotator!r}")

    @app.get("/catalog")
    def get_catalog():
        return {"patterns": [pattern_to_dict(p) for p in catalog]}

    @app.get("/projects")
    def list_projects(who: str | None = Depends(identity)):
        out = []
        for pid in store.list_ids():
            p = store.load(pid)
            out.append(
                {
                    "id": pid,
                    "revision": p.revision,
                    "texts": len(p.corpus),
                    "annotators": list(p.annotators),
                }
            )
        return {"projects": out}

    @app.get("/projects/{project_id}")
    def get_project(project_id: str, who: str | None = Depends(identity)):
        project = get_project_or_404(project_id)
        return {
            "id": project_id,
            "revision": project.revision,
            "project": project_to_dict(visible_project(project, catalog, who)),
        }

    @app.get("/projects/{project_id}/queue")
    def get_queue(
        project_id: str,
        annotator: str = Query(...),
        stage: int = Query(1),
        who: str | None = Depends(identity),
    ):
        require_self(who, annotator)
        project = get_project_or_404(project_id)
        if stage not in (1, 2, 3):
            raise _error(422, "bad-stage", f"stage must be 1, 2 or 3, got {stage}")
        items = build_queue(project, catalog, annotator, stage)
        payload = []
        pair = tuple(project.annotators[:2])
        for item in items:
            entry = item.to_dict()
            if stage == 2 and len(pair) == 2:
                other = pair[1] if annotator == pair[0] else pair[0]
                counterpart = next(
                    (
                        a
                        for a in project.annotations
                        if a.relation_id == item.relation_id
                        and a.stage == 1
                        and a.annotator == other
                    ),
                    None,
                )
                entry["counterpart"] = (
                    annotation_to_dict(counterpart) if counterpart else None
                )
            if stage == 3:
                entry["annotations"] = [
                    annotation_to_dict(a)
                    for a in project.annotations
                    if a.relation_id == item.relation_id and a.stage == 1
                ]
            payload.append(entry)
        return {"revision": project.revision, "items": payload}

    @app.post("/projects/{project_id}/annotations")
    def post_annotation(
        project_id: str,
        submission: AnnotationSubmission,
        who: str | None = Depends(identity),
    ):
        try:
            annotation = annotation_from_dict(submission.annotation)
        except (KeyError, TypeError, ValueError) as exc:
            raise _error(422, "bad-annotation", f"malformed annotation: {exc}") from None
        require_self(who, annotation.annotator)

        collected: list[Diagnostic] = []

        def mutate(project: Project) -> Project:
            if annotation.annotator not in project.annotators:
                raise _http_diags(
                    422,
                    [
                        Diagnostic(
                            "error",
                            "unknown-annotator",
                            f"{annotation.annotator!r} is not part of this project",
                        )
                    ],
                )
            try:
                mt, _ = project.resolve_relation(annotation.relation_id)
            except (KeyError, ValueError):
                raise _http_diags(
                    422,
                    [
                        Diagnostic(
                            "error",
                            "unknown-relation",
                            f"no relation {annotation.relation_id!r}",
                            relation_id=annotation.relation_id,
                        )
                    ],
                ) from None
            diags = validate_annotation(annotation, mt, catalog)
            if any(d.is_error for d in diags):
                raise _http_diags(422, diags)
            collected.extend(diags)
            others = tuple(
                a
                for a in project.annotations
                if not (
                    a.relation_id == annotation.relation_id
                    and a.annotator == annotation.annotator
                    and a.stage == annotation.stage
                )
            )
            return replace(project, annotations=(*others, annotation))

        updated = _apply(store, project_id, submission.revision, mutate)
        return {
            "revision": updated.revision,
            "diagnostics": [d.to_dict() for d in collected],
        }

    @app.post("/projects/{project_id}/crosschecks")
    def post_crosscheck(
        project_id: str,
        submission: CrossCheckSubmission,
        who: str | None = Depends(identity),
    ):
        require_self(who, submission.annotator)
        try:
            response = CrossCheckResponse(
                submission.relation_id, submission.annotator, submission.response
            )
        except ValueError as exc:
            raise _error(422, "bad-response", str(exc)) from None

        def mutate(project: Project) -> Project:
            verdicts = stage1_verdicts(project, catalog)
            if verdicts.get(response.relation_id) is not AgreementVerdict.DISAGREED:
                raise _error(
                    422,
                    "not-a-disagreement",
                    f"{response.relation_id!r} has no pending cross-check",
                )
            if any(
                c.relation_id == response.relation_id and c.annotator == response.annotator
                for c in project.cross_checks
            ):
                raise _error(
                    409,
                    "already-responded",
                    f"{response.annotator!r} already responded on {response.relation_id!r}",
                )
            return replace(project, cross_checks=(*project.cross_checks, response))

        updated = _apply(store, project_id, submission.revision, mutate)
        return {"revision": updated.revision}

    @app.post("/projects/{project_id}/resolutions")
    def post_resolution(
        project_id: str,
        submission: ResolutionSubmission,
        who: str | None = Depends(identity),
    ):
        if submission.stage != 3:
            raise _error(422, "bad-stage", "only stage-3 resolutions are recorded")

        def mutate(project: Project) -> Project:
            pending = {
                item.relation_id
                for item in build_queue(project, catalog, "", 3)
                if item.status == "pending"
            }
            if submission.relation_id not in pending:
                raise _error(
                    422,
                    "not-pending",
                    f"{submission.relation_id!r} is not awaiting discussion",
                )
            try:
                outcome = DiscussionOutcome(
                    submission.relation_id,
                    submission.decision,
                    submission.accepted_annotator,
                    submission.rng_seed,
                )
                resolved = resolve_stage3(
                    [submission.relation_id],
                    [outcome],
                    project.annotators,
                    base_seed=project.seed,
                )
            except ValueError as exc:
                raise _error(422, "bad-resolution", str(exc)) from None
            resolution = resolved[submission.relation_id]
            return replace(project, resolutions=(*project.resolutions, resolution))

        updated = _apply(store, project_id, submission.revision, mutate)
        new = next(
            r
            for r in store.load(project_id).resolutions
            if r.relation_id == submission.relation_id and r.stage == 3
        )
        return {
            "revision": updated.revision,
            "resolution": {
                "relation_id": new.relation_id,
                "stage": new.stage,
                "outcome": new.outcome,
                "chosen": list(new.chosen),
                "rng_seed": new.rng_seed,
            },
        }

    @app.get("/projects/{project_id}/report")
    def get_report(
        project_id: str,
        split: str | None = Query(default=None),
        kappa_mode: str = Query(default="resolved"),
        who: str | None = Depends(identity),
    ):
        project = get_project_or_404(project_id)
        try:
            report = agreement_report(
                project, catalog, split=split, kappa_mode=kappa_mode, strict=False
            )
        except ValueError as exc:
            raise _error(422, "bad-report-request", str(exc)) from None
        return report.to_dict()

    @app.get("/projects/{project_id}/distributions")
    def get_distributions(
        project_id: str,
        stage: int = Query(default=3),
        per_annotator: bool = Query(default=False),
        split: str | None = Query(default=None),
        who: str | None = Depends(identity),
    ):
        project = get_project_or_404(project_id)
        try:
            pattern_table = pattern_distribution(
                project, catalog, stage=stage, per_annotator=per_annotator, split=split
            )
        except ValueError as exc:
            raise _error(422, "bad-distribution-request", str(exc)) from None
        return {
            "relation": relation_distribution(project).to_dict(),
            "pattern": pattern_table.to_dict(),
        }

    return app


def _apply(
    store: ProjectStore,
    project_id: str,
    revision: int,
    mutate: Callable[[Project], Project],
) -> Project:
    try:
        return store.update(project_id, revision, mutate)
    except KeyError:
        raise _error(404, "not-found", f"no project {project_id!r}") from None
    except StaleRevisionError as exc:
        raise _error(
            409,
            "stale-revision",
            f"submitted revision {exc.submitted}, store is at {exc.current}",
        ) from None


def serve(
    project_store_path: str | Path,
    bind_address: str = "127.0.0.1:8765",
    catalog: Catalog | None = None,
) -> None:
    """Run the annotation service until interrupted."""
    import uvicorn

    host, _, port = bind_address.partition(":")
    store = ProjectStore(project_store_path)
    app = create_app(store, catalog)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8765), log_level="warning")
