"""Three-stage inter-annotator agreement over explanation annotations.

Stage 1 compares the two blind annotations per relation with a fixed
rule: the chosen patterns must be semantically equivalent and every
shared slot fill must overlap. Stage 2 turns disagreements into
semi-agreements when an annotator accepts the counterpart annotation in
a cross-check. Stage 3 records discussion outcomes for what is left.
Cohen's kappa is computed over pattern equivalence classes, and
coverage is the fraction of (semi-)agreed relations whose explanation
is not the catch-all label.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

import random
import re
import zlib
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import (
    DEFAULT_SEED,
    CrossCheckResponse,
    EarAnnotation,
    Project,
    Resolution,
    SlotFill,
)
from .patterns import OTHER_ID, Catalog, equivalence_class_map, semantically_equivalent


class AgreementError(ValueError):
    pass


class RelationMismatchError(AgreementError):
    """Raised when two annotations under comparison explain different relations."""


class MissingResponseError(AgreementError):
    """Raised when a stage-1 disagreement lacks a cross-check response."""


class MissingOutcomeError(AgreementError):
    """Raised when a stage-3 discussion outcome is missing."""


class AgreementVerdict(Enum):
    AGREED = "agreed"
    SEMI_AGREED = "semi_agreed"
    DISAGREED = "disagreed"
    UNRESOLVED = "unresolved"


_SETTLED = (AgreementVerdict.AGREED, AgreementVerdict.SEMI_AGREED)

_TOKEN = re.compile(r"\w+")


def tokenize(text: str) -> frozenset[str]:
    """Lowercased, punctuation-free token set used for implicit fills."""
    return frozenset(_TOKEN.findall(text.lower()))


def derive_seed(base_seed: int, relation_id: str) -> int:
    """Stable per-relation seed (independent of hash randomization)."""
    return zlib.crc32(relation_id.encode("utf-8"), base_seed & 0xFFFFFFFF)


def pick_one(candidates: Sequence[str], seed: int) -> str:
    """Deterministic uniform choice given a seed; order-insensitive."""
    return random.Random(seed).choice(sorted(candidates))


def spans_overlap(
    a: SlotFill, b: SlotFill, tokenizer: Callable[[str], frozenset[str]] = tokenize
) -> bool:
    """Whether two fills of the same slot count as the same phrase.

    Span-anchored fills overlap when some pair of spans shares at least
    one character position of the same segment. Implicit fills fall
    back to token overlap of their texts, as does the mixed case.
    """
    if a.spans and b.spans:
        for sa in a.spans:
            for sb in b.spans:
                if sa.segment_id == sb.segment_id and sa.start < sb.end and sb.start < sa.end:
                    return True
        return False
    return bool(tokenizer(a.text) & tokenizer(b.text))


def compare_stage1(a: EarAnnotation, b: EarAnnotation, catalog: Catalog) -> AgreementVerdict:
    """Rule-based comparison of two blind annotations of one relation."""
    if a.relation_id != b.relation_id:
        raise RelationMismatchError(
            f"annotations explain different relations: {a.relation_id!r} vs {b.relation_id!r}"
        )
    if a.annotator == b.annotator:
        raise AgreementError("cannot compare an annotator against themselves")
    pa, pb = catalog.get(a.pattern_id), catalog.get(b.pattern_id)
    if pa.is_other and pb.is_other:
        return AgreementVerdict.AGREED
    if pa.is_other or pb.is_other:
        return AgreementVerdict.DISAGREED
    if not semantically_equivalent(pa, pb):
        return AgreementVerdict.DISAGREED
    shared = {f.slot for f in a.fills} & {f.slot for f in b.fills}
    for slot in sorted(shared):
        fa, fb = a.fill_for(slot), b.fill_for(slot)
        assert fa is not None and fb is not None
        if not spans_overlap(fa, fb):
            return AgreementVerdict.DISAGREED
    return AgreementVerdict.AGREED


def resolve_stage2(
    verdicts: Mapping[str, AgreementVerdict],
    responses: Iterable[CrossCheckResponse],
    strict: bool = True,
) -> dict[str, AgreementVerdict]:
    """Fold cross-check responses into the stage-1 verdicts.

    A disagreement becomes semi-agreed as soon as one annotator answers
    yes, stays disagreed when both answer no, and is unresolved when
    someone is unsure and nobody says yes. With ``strict`` a
    disagreement without any response raises; otherwise it simply stays
    disagreed (mid-workflow reporting).
    """
    by_rel: dict[str, list[CrossCheckResponse]] = {}
    for r in responses:
        bucket = by_rel.setdefault(r.relation_id, [])
        if any(existing.annotator == r.annotator for existing in bucket):
            raise AgreementError(
                f"duplicate cross-check response by {r.annotator!r} on {r.relation_id!r}"
            )
        bucket.append(r)

    out: dict[str, AgreementVerdict] = {}
    for rel in verdicts:
        verdict = verdicts[rel]
        if verdict is not AgreementVerdict.DISAGREED:
            out[rel] = verdict
            continue
        answers = [r.response for r in by_rel.get(rel, [])]
        if not answers and strict:
            raise MissingResponseError(rel)
        if "yes" in answers:
            out[rel] = AgreementVerdict.SEMI_AGREED
        elif "unsure" in answers:
            out[rel] = AgreementVerdict.UNRESOLVED
        else:
            out[rel] = AgreementVerdict.DISAGREED
    return out


@dataclass(frozen=True)
class DiscussionOutcome:
    """What the stage-3 discussion concluded for one relation."""

    relation_id: str
    decision: str  # "accept" | "both" | "reject"
    accepted_annotator: str | None = None
    rng_seed: int | None = None

    def __post_init__(self):
        if self.decision not in ("accept", "both", "reject"):
            raise ValueError(f"bad stage-3 decision {self.decision!r}")
        if self.decision == "accept" and not self.accepted_annotator:
            raise ValueError("accept decision needs the accepted annotator")


def resolve_stage3(
    pending: Iterable[str],
    outcomes: Iterable[DiscussionOutcome],
    annotators: Sequence[str],
    base_seed: int = DEFAULT_SEED,
    strict: bool = True,
) -> dict[str, Resolution]:
    """Turn discussion outcomes into resolution records.

    When both annotations remain acceptable, both annotators are
    recorded and the actual pick is a seeded random draw; replaying
    with the same seed reproduces it.
    """
    by_rel: dict[str, DiscussionOutcome] = {}
    for o in outcomes:
        if o.relation_id in by_rel:
            raise AgreementError(f"duplicate stage-3 outcome for {o.relation_id!r}")
        by_rel[o.relation_id] = o
    pending_set = set(pending)
    unknown = sorted(set(by_rel) - pending_set)
    if unknown:
        raise AgreementError(f"stage-3 outcomes for relations not pending: {unknown}")

    out: dict[str, Resolution] = {}
    for rel in sorted(pending_set):
        o = by_rel.get(rel)
        if o is None:
            if strict:
                raise MissingOutcomeError(rel)
            out[rel] = Resolution(rel, 3, AgreementVerdict.UNRESOLVED.value)
            continue
        if o.decision == "reject":
            out[rel] = Resolution(rel, 3, AgreementVerdict.DISAGREED.value)
        elif o.decision == "accept":
            if o.accepted_annotator not in annotators:
                raise AgreementError(
                    f"{rel}: accepted annotator {o.accepted_annotator!r} is not one of {annotators}"
                )
            out[rel] = Resolution(
                rel, 3, AgreementVerdict.SEMI_AGREED.value, (o.accepted_annotator,)
            )
        else:
            seed = o.rng_seed if o.rng_seed is not None else derive_seed(base_seed, rel)
            out[rel] = Resolution(
                rel,
                3,
                AgreementVerdict.SEMI_AGREED.value,
                tuple(sorted(annotators[:2])),
                rng_seed=seed,
            )
    return out


def chosen_annotator(resolution: Resolution) -> str | None:
    """The annotator whose annotation a resolution settles on."""
    if not resolution.chosen:
        return None
    if len(resolution.chosen) == 1:
        return resolution.chosen[0]
    seed = resolution.rng_seed if resolution.rng_seed is not None else 0
    return pick_one(resolution.chosen, seed)


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


def confusion_matrix(pairs: Sequence[tuple[str, str]]) -> ConfusionMatrix:
    labels = tuple(sorted({a for a, _ in pairs} | {b for _, b in pairs}))
    index = {label: i for i, label in enumerate(labels)}
    grid = [[0] * len(labels) for _ in labels]
    for a, b in pairs:
        grid[index[a]][index[b]] += 1
    return ConfusionMatrix(labels, tuple(tuple(row) for row in grid))


def cohen_kappa(pairs: Sequence[tuple[str, str]]) -> float:
    """Chance-corrected agreement between two label sequences.

    Chance agreement comes from the per-annotator marginals. In the
    degenerate case where chance agreement is exactly 1 (both sides use
    a single identical label), the convention here is 1.0 for perfect
    observed agreement and 0.0 otherwise.
    """
    if not pairs:
        raise AgreementError("cannot compute kappa over an empty pair list")
    n = len(pairs)
    observed = sum(1 for a, b in pairs if a == b) / n
    left = Counter(a for a, _ in pairs)
    right = Counter(b for _, b in pairs)
    expected = sum(left[label] * right.get(label, 0) for label in left) / (n * n)
    if expected == 1.0:
        return 1.0 if observed == 1.0 else 0.0
    return (observed - expected) / (1.0 - expected)


@dataclass(frozen=True)
class Coverage:
    covered: int
    total: int

    @property
    def ratio(self) -> float | None:
        return self.covered / self.total if self.total else None


def coverage(chosen_pattern_ids: Iterable[str]) -> Coverage:
    ids = list(chosen_pattern_ids)
    return Coverage(sum(1 for p in ids if p != OTHER_ID), len(ids))


# --- full pipeline --------------------------------------------------------

@dataclass
class StageState:
    """Internal per-stage snapshot of the pipeline."""

    verdicts: dict[str, AgreementVerdict] = field(default_factory=dict)
    labels: dict[str, tuple[str, str]] = field(default_factory=dict)
    choices: dict[str, str] = field(default_factory=dict)  # relation -> annotator

    def settled(self) -> list[str]:
        return sorted(r for r, v in self.verdicts.items() if v in _SETTLED)


@dataclass
class PipelineResult:
    annotators: tuple[str, str] | None
    compared: tuple[str, ...]
    annotations: dict[str, dict[str, EarAnnotation]]
    stages: dict[int, StageState]
    response_tallies: dict[str, dict[str, int]]

    def chosen_annotation(self, relation_id: str, stage: int = 3) -> EarAnnotation | None:
        annotator = self.stages[stage].choices.get(relation_id)
        if annotator is None:
            return None
        return self.annotations[relation_id][annotator]

    def chosen_patterns(self, stage: int) -> dict[str, str]:
        state = self.stages[stage]
        return {
            rel: self.annotations[rel][annot].pattern_id
            for rel, annot in sorted(state.choices.items())
        }


def stage1_annotation_pairs(
    project: Project, split: str | None = None
) -> tuple[tuple[str, str] | None, dict[str, dict[str, EarAnnotation]]]:
    """Stage-1 annotations of the project's first two annotators, by relation.

    Only relations annotated by both are returned; a later annotation by
    the same annotator replaces an earlier one.
    """
    if len(project.annotators) < 2:
        return None, {}
    pair = (project.annotators[0], project.annotators[1])
    allowed = set(project.relation_keys(split)) if split else set(project.relation_keys())
    collected: dict[str, dict[str, EarAnnotation]] = {}
    for a in project.annotations:
        if a.stage != 1 or a.annotator not in pair:
            continue
        if a.relation_id not in allowed:
            continue
        collected.setdefault(a.relation_id, {})[a.annotator] = a
    complete = {
        rel: annots for rel, annots in collected.items() if len(annots) == 2
    }
    return pair, complete


def run_pipeline(
    project: Project,
    catalog: Catalog,
    split: str | None = None,
    seed: int | None = None,
    strict: bool = False,
) -> PipelineResult:
    """Run stages 1-3 over a project and keep every intermediate state.

    ``seed`` defaults to the project's stored seed; it drives every
    random pick (same inputs, same seed, same choices). With ``strict``
    missing cross-checks or stage-3 outcomes raise instead of leaving
    relations pending.
    """
    base_seed = project.seed if seed is None else seed
    pair, annotations = stage1_annotation_pairs(project, split)
    compared = tuple(sorted(annotations))
    stages = {1: StageState(), 2: StageState(), 3: StageState()}
    tallies: dict[str, dict[str, int]] = {}

    if pair is None or not compared:
        return PipelineResult(pair, compared, annotations, stages, tallies)

    class_of = equivalence_class_map(catalog)

    s1 = stages[1]
    for rel in compared:
        a, b = annotations[rel][pair[0]], annotations[rel][pair[1]]
        s1.verdicts[rel] = compare_stage1(a, b, catalog)
        s1.labels[rel] = (class_of[a.pattern_id], class_of[b.pattern_id])
        if s1.verdicts[rel] is AgreementVerdict.AGREED:
            s1.choices[rel] = pick_one(pair, derive_seed(base_seed, rel))

    responses = [
        c
        for c in project.cross_checks
        if c.relation_id in annotations and c.annotator in pair
    ]
    tallies = {annot: {"yes": 0, "no": 0, "unsure": 0} for annot in pair}
    for r in responses:
        tallies[r.annotator][r.response] += 1

    s2 = stages[2]
    s2.verdicts = resolve_stage2(s1.verdicts, responses, strict=strict)
    s2.labels = dict(s1.labels)
    s2.choices = dict(s1.choices)
    responses_by_rel: dict[str, list[CrossCheckResponse]] = {}
    for r in responses:
        responses_by_rel.setdefault(r.relation_id, []).append(r)
    for rel in compared:
        if s2.verdicts[rel] is not AgreementVerdict.SEMI_AGREED:
            continue
        if s1.verdicts[rel] is not AgreementVerdict.DISAGREED:
            continue
        yes_from = [r.annotator for r in responses_by_rel.get(rel, []) if r.response == "yes"]
        acceptable = sorted(
            {pair[1] if annot == pair[0] else pair[0] for annot in yes_from}
        )
        chosen = (
            acceptable[0]
            if len(acceptable) == 1
            else pick_one(acceptable, derive_seed(base_seed, rel))
        )
        s2.choices[rel] = chosen
        label = class_of[annotations[rel][chosen].pattern_id]
        s2.labels[rel] = (label, label)

    s3 = stages[3]
    s3.verdicts = dict(s2.verdicts)
    s3.labels = dict(s2.labels)
    s3.choices = dict(s2.choices)
    res_by_rel = {
        r.relation_id: r
        for r in project.resolutions
        if r.stage == 3 and r.relation_id in annotations
    }
    for rel in compared:
        if s2.verdicts[rel] not in (AgreementVerdict.DISAGREED, AgreementVerdict.UNRESOLVED):
            continue
        res = res_by_rel.get(rel)
        if res is None:
            if strict:
                raise MissingOutcomeError(rel)
            continue
        verdict = AgreementVerdict(res.outcome)
        s3.verdicts[rel] = verdict
        if verdict is AgreementVerdict.SEMI_AGREED:
            chosen = chosen_annotator(res)
            if chosen is None or chosen not in pair:
                raise AgreementError(f"{rel}: resolution does not name a valid annotation")
            s3.choices[rel] = chosen
            label = class_of[annotations[rel][chosen].pattern_id]
            s3.labels[rel] = (label, label)

    return PipelineResult(pair, compared, annotations, stages, tallies)


@dataclass(frozen=True)
class StageStats:
    stage: int
    compared: int
    settled: int  # agreed at stage 1, semi-agreed cumulative afterwards
    verdict_counts: Mapping[str, int]
    kappa: float | None
    pattern_coverage: Coverage

    @property
    def ratio(self) -> float | None:
        return self.settled / self.compared if self.compared else None


@dataclass(frozen=True)
class AgreementReport:
    annotators: tuple[str, ...]
    compared: int
    stages: tuple[StageStats, ...]
    response_tallies: Mapping[str, Mapping[str, int]]
    kappa_mode: str
    seed: int

    def stage(self, number: int) -> StageStats:
        return self.stages[number - 1]

    def to_dict(self) -> dict:
        return {
            "annotators": list(self.annotators),
            "compared": self.compared,
            "kappa_mode": self.kappa_mode,
            "seed": self.seed,
            "stages": [
                {
                    "stage": s.stage,
                    "compared": s.compared,
                    "settled": s.settled,
                    "ratio": s.ratio,
                    "verdicts": dict(sorted(s.verdict_counts.items())),
                    "kappa": s.kappa,
                    "coverage": {
                        "covered": s.pattern_coverage.covered,
                        "total": s.pattern_coverage.total,
                        "ratio": s.pattern_coverage.ratio,
                    },
                }
                for s in self.stages
            ],
            "response_tallies": {
                annot: dict(sorted(t.items()))
                for annot, t in sorted(self.response_tallies.items())
            },
        }

    def to_text(self) -> str:
        lines = [
            f"annotators: {', '.join(self.annotators) if self.annotators else '(none)'}",
            f"compared relations: {self.compared}",
        ]
        for s in self.stages:
            word = "agreed" if s.stage == 1 else "semi-agreed"
            ratio = f"{100 * s.ratio:.1f}%" if s.ratio is not None else "n/a"
            kappa = f"{s.kappa:.3f}" if s.kappa is not None else "n/a"
            cov = s.pattern_coverage
            cov_txt = (
                f"{cov.covered}/{cov.total} ({100 * cov.ratio:.1f}%)"
                if cov.ratio is not None
                else f"{cov.covered}/{cov.total} (undefined)"
            )
            lines.append(
                f"stage {s.stage}: {word} {s.settled}/{s.compared} ({ratio})  "
                f"kappa {kappa}  coverage {cov_txt}"
            )
        if self.response_tallies:
            lines.append("stage 2 responses:")
            for annot in sorted(self.response_tallies):
                t = self.response_tallies[annot]
                lines.append(
                    f"  {annot}: yes {t.get('yes', 0)}  no {t.get('no', 0)}  "
                    f"unsure {t.get('unsure', 0)}"
                )
        return "\n".join(lines)


def agreement_report(
    project: Project,
    catalog: Catalog,
    split: str | None = None,
    seed: int | None = None,
    kappa_mode: str = "resolved",
    strict: bool = False,
) -> AgreementReport:
    """Aggregate per-stage agreement, kappa, and coverage for a project.

    ``kappa_mode`` "resolved" recomputes kappa after each stage's label
    updates (an acceptance replaces the accepter's label); "original"
    keeps stage-1 labels and restricts stages 2-3 to their settled
    relations.
    """
    if kappa_mode not in ("resolved", "original"):
        raise AgreementError(f"unknown kappa mode {kappa_mode!r}")
    result = run_pipeline(project, catalog, split=split, seed=seed, strict=strict)
    base_seed = project.seed if seed is None else seed

    stats: list[StageStats] = []
    for stage_no in (1, 2, 3):
        state = result.stages[stage_no]
        settled = state.settled()
        counts = Counter(v.value for v in state.verdicts.values())
        if not result.compared:
            kappa = None
        elif kappa_mode == "resolved" or stage_no == 1:
            kappa = cohen_kappa([state.labels[rel] for rel in result.compared])
        else:
            original = result.stages[1].labels
            kappa = cohen_kappa([original[rel] for rel in settled]) if settled else None
        chosen = result.chosen_patterns(stage_no)
        stats.append(
            StageStats(
                stage=stage_no,
                compared=len(result.compared),
                settled=len(settled),
                verdict_counts=dict(sorted(counts.items())),
                kappa=kappa,
                pattern_coverage=coverage(chosen.values()),
            )
        )

    return AgreementReport(
        annotators=result.annotators or (),
        compared=len(result.compared),
        stages=tuple(stats),
        response_tallies=result.response_tallies,
        kappa_mode=kappa_mode,
        seed=base_seed,
    )
