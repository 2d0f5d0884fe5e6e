"""Descriptive statistics over a project: relation-type and per-pattern
distributions, the contextual-clue table, and delimited exports.

Tables store exact integer counts; percentages are derived at render
time and never stored.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .agreement import AgreementVerdict, PipelineResult, run_pipeline
from .corpus import Project, relation_key
from .patterns import OTHER_ID, Catalog, PatternFamily, RelationType


class ReportingError(ValueError):
    pass


@dataclass(frozen=True)
class DistributionRow:
    label: str
    group: str | None
    counts: tuple[int, ...]


@dataclass(frozen=True)
class DistributionTable:
    title: str
    columns: tuple[str, ...]
    rows: tuple[DistributionRow, ...]

    def column_totals(self) -> tuple[int, ...]:
        totals = [0] * len(self.columns)
        for row in self.rows:
            for i, c in enumerate(row.counts):
                totals[i] += c
        return tuple(totals)

    def group_totals(self, group: str) -> tuple[int, ...]:
        totals = [0] * len(self.columns)
        for row in self.rows:
            if row.group == group:
                for i, c in enumerate(row.counts):
                    totals[i] += c
        return tuple(totals)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "columns": list(self.columns),
            "rows": [
                {"label": r.label, "group": r.group, "counts": list(r.counts)}
                for r in self.rows
            ],
            "totals": list(self.column_totals()),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        grouped = any(r.group for r in self.rows)
        header = (["group", "label"] if grouped else ["label"]) + list(self.columns)
        writer.writerow(header)
        for r in self.rows:
            lead = [r.group or "", r.label] if grouped else [r.label]
            writer.writerow(lead + [str(c) for c in r.counts])
        return buf.getvalue()

    def to_text(self) -> str:
        grouped = any(r.group for r in self.rows)
        lines = [self.title]
        totals = self.column_totals()
        head = "  ".join(f"{c:>10}" for c in self.columns)
        label_width = max([12] + [len(r.label) + (len(r.group or "") + 1) for r in self.rows])
        lines.append(f"{'':<{label_width}}  {head}")
        for r in self.rows:
            label = f"{r.group}/{r.label}" if grouped and r.group else r.label
            cells = "  ".join(f"{c:>10}" for c in r.counts)
            lines.append(f"{label:<{label_width}}  {cells}")
        lines.append(f"{'total':<{label_width}}  " + "  ".join(f"{t:>10}" for t in totals))
        return "\n".join(lines)


def relation_distribution(project: Project) -> DistributionTable:
    """Counts of relations per relation type, overall and per split."""
    split_values = tuple(sorted(set(project.split.values())))
    columns = ("all", *split_values)
    counts: dict[RelationType, Counter] = {rt: Counter() for rt in RelationType}
    for mt in project.corpus:
        part = project.split.get(mt.id)
        for rel in mt.relations:
            counts[rel.rel_type]["all"] += 1
            if part:
                counts[rel.rel_type][part] += 1
    rows = tuple(
        DistributionRow(rt.value, None, tuple(counts[rt][c] for c in columns))
        for rt in RelationType
    )
    return DistributionTable("relation distribution", columns, rows)


def _relation_types(project: Project) -> dict[str, RelationType]:
    types: dict[str, RelationType] = {}
    for mt in project.corpus:
        for rel in mt.relations:
            types[relation_key(mt.id, rel.id)] = rel.rel_type
    return types


def pattern_distribution(
    project: Project,
    catalog: Catalog,
    stage: int = 3,
    per_annotator: bool = False,
    split: str | None = None,
    seed: int | None = None,
    pipeline: PipelineResult | None = None,
) -> DistributionTable:
    """Per-pattern annotation counts, grouped by the relation's type.

    With ``per_annotator`` the columns are the two annotators' raw
    stage-1 labels; otherwise one column holds the settled corpus at the
    given stage (the chosen annotation per agreed or semi-agreed
    relation). The catch-all label appears as an explicit row in every
    group.
    """
    if stage not in (1, 2, 3):
        raise ReportingError(f"unknown stage {stage!r}")
    result = pipeline or run_pipeline(project, catalog, split=split, seed=seed)
    rel_types = _relation_types(project)

    if per_annotator:
        if result.annotators is None:
            raise ReportingError("per-annotator distribution needs two annotators")
        columns = result.annotators
        cells: dict[tuple[str, str], Counter] = {}
        for rel in result.compared:
            rt = rel_types[rel].value
            for annot in columns:
                pattern = result.annotations[rel][annot].pattern_id
                cells.setdefault((rt, pattern), Counter())[annot] += 1
    else:
        columns = (f"stage{stage}",)
        cells = {}
        for rel, pattern in result.chosen_patterns(stage).items():
            rt = rel_types[rel].value
            cells.setdefault((rt, pattern), Counter())[columns[0]] += 1

    rows: list[DistributionRow] = []
    for rt in RelationType:
        for p in (*catalog.for_relation_type(rt, include_other=False), None):
            pid = p.id if p is not None else OTHER_ID
            counter = cells.get((rt.value, pid), Counter())
            rows.append(
                DistributionRow(pid, rt.value, tuple(counter[c] for c in columns))
            )
    title = "pattern distribution " + ("per annotator (stage 1)" if per_annotator else f"(stage {stage})")
    return DistributionTable(title, tuple(columns), tuple(rows))


_FAMILY_ORDER = (
    PatternFamily.CONSEQUENCES,
    PatternFamily.ANALOGY,
    PatternFamily.PRESUPPOSITION,
    PatternFamily.PROPOSITION,
    PatternFamily.QUANTIFIER,
)

CLUE_KINDS = ("value_judgment", "causality")


def clue_table(
    project: Project,
    catalog: Catalog,
    sample: Iterable[str] | None = None,
    stage: int = 3,
    split: str | None = None,
    seed: int | None = None,
) -> DistributionTable:
    """Pattern-family instance counts and clue counts over a sample.

    The sample defaults to every relation carrying clue tags. Each
    sampled relation contributes one instance to the family of its
    settled explanation, and one count per clue kind for which at least
    one tag is recorded. Relations settled on the catch-all label have
    no family and are skipped.
    """
    result = run_pipeline(project, catalog, split=split, seed=seed)
    tags_by_rel: dict[str, set[str]] = {}
    for tag in project.clue_tags:
        tags_by_rel.setdefault(tag.relation_id, set()).add(tag.clue_kind)

    if sample is None:
        sample_ids = tuple(sorted(tags_by_rel))
    else:
        sample_ids = tuple(sorted(set(sample)))
    known = set(project.relation_keys())
    missing = [r for r in sample_ids if r not in known]
    if missing:
        raise ReportingError(f"sample references missing relations: {missing}")

    chosen = result.chosen_patterns(stage)
    instances: Counter = Counter()
    clues: dict[str, Counter] = {kind: Counter() for kind in CLUE_KINDS}
    for rel in sample_ids:
        pattern_id = chosen.get(rel)
        if pattern_id is None or pattern_id == OTHER_ID:
            continue
        family = catalog.get(pattern_id).family
        instances[family] += 1
        for kind in tags_by_rel.get(rel, ()):
            clues[kind][family] += 1

    columns = ("instances", *CLUE_KINDS)
    rows = tuple(
        DistributionRow(
            family.value,
            None,
            (instances[family], *(clues[kind][family] for kind in CLUE_KINDS)),
        )
        for family in _FAMILY_ORDER
        if instances[family]
    )
    return DistributionTable("clue distribution", columns, rows)


def corpus_summary(project: Project) -> dict:
    """Text/relation counts plus the relation-type distribution."""
    table = relation_distribution(project)
    return {
        "texts": len(project.corpus),
        "relations": sum(len(mt.relations) for mt in project.corpus),
        "annotators": list(project.annotators),
        "annotations": len(project.annotations),
        "relation_distribution": table.to_dict(),
        "split_sizes": dict(
            sorted(Counter(project.split.values()).items())
        ),
    }
