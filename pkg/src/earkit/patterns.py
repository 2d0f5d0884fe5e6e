"""Rhetorical-pattern catalog and the sign algebra behind it.

A rhetorical pattern is a fixed explanation frame for one argumentative
relation: a consequence-style pattern ("x is good because it promotes y,
which is good"), an analogy, a presupposition, a proposition restatement,
or a quantifier attack. Consequence patterns carry four polarity
parameters whose sign product determines which relation type the pattern
can explain; the catalog is shipped as a data file and this module checks
it against that algebra rather than deriving it.

All values are immutable after load and safe to share between threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping


class CatalogError(ValueError):
    """Raised when a catalog document violates the schema."""


class UnknownPatternError(KeyError):
    """Raised when a pattern id is not present in the catalog."""


class MissingSlotFillError(ValueError):
    """Raised when an explanation is rendered without all slot fills."""


class NotAnAttackError(ValueError):
    """Raised when parameters aimed at a relation do not attack it.

    The sign algebra only yields an undercut when the implied judgment
    contradicts the judgment asserted by the targeted relation; no
    catalog pattern lets a segment *support* a relation this way.
    """


class ValuePolarity(Enum):
    GOOD = "good"
    BAD = "bad"

    def sign(self) -> int:
        return 1 if self is ValuePolarity.GOOD else -1

    def flipped(self) -> "ValuePolarity":
        return ValuePolarity.BAD if self is ValuePolarity.GOOD else ValuePolarity.GOOD


class CausalDirection(Enum):
    PROMOTE = "promote"
    SUPPRESS = "suppress"

    def sign(self) -> int:
        return 1 if self is CausalDirection.PROMOTE else -1


class AntecedentPolarity(Enum):
    HAPPENS = "happens"
    NOT_HAPPENS = "not_happens"

    def sign(self) -> int:
        return 1 if self is AntecedentPolarity.HAPPENS else -1


class RelationType(Enum):
    SUPPORT = "support"
    REBUTTAL = "rebuttal"
    UNDERCUT = "undercut"


class PatternFamily(Enum):
    CONSEQUENCES = "consequences"
    ANALOGY = "analogy"
    PRESUPPOSITION = "presupposition"
    PROPOSITION = "proposition"
    QUANTIFIER = "quantifier"
    OTHER = "other"


OTHER_ID = "OTHER"
SLOT_NAMES = ("x", "y", "p", "q")
ANCHOR_SIDES = ("source", "target", "either", "relation")

# slot sets each family must declare, keyed by family
_FAMILY_SLOTS = {
    PatternFamily.CONSEQUENCES: {"x", "y"},
    PatternFamily.ANALOGY: {"x", "y"},
    PatternFamily.PRESUPPOSITION: {"p"},
    PatternFamily.PROPOSITION: {"p"},
    PatternFamily.QUANTIFIER: {"q"},
    PatternFamily.OTHER: set(),
}

_PLACEHOLDER = re.compile(r"\{([a-z])\}")


@dataclass(frozen=True)
class AcParams:
    """Polarity parameters of a consequence-scheme pattern.

    ``claim`` is the value judgment of x asserted by the supported or
    attacked side (the target segment, or the targeted relation for
    undercuts); ``val_y`` the judgment of the consequence y;
    ``antecedent`` whether the causal statement is about x happening or
    not happening; ``causality`` whether y is promoted or suppressed.
    """

    claim: ValuePolarity
    val_y: ValuePolarity
    antecedent: AntecedentPolarity
    causality: CausalDirection

    def implied_sign(self) -> int:
        return self.val_y.sign() * self.causality.sign() * self.antecedent.sign()


@dataclass(frozen=True)
class SlotSpec:
    name: str
    role: str
    anchored_side: str  # source | target | either | relation


@dataclass(frozen=True)
class RhetoricalPattern:
    id: str
    family: PatternFamily
    relation_type: RelationType | None
    slots: tuple[SlotSpec, ...]
    ac: AcParams | None
    template: str
    algebra_exception: bool = False

    @property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    @property
    def is_other(self) -> bool:
        return self.id == OTHER_ID


@dataclass(frozen=True)
class CatalogDiagnostic:
    pattern_id: str
    severity: str  # "error" | "note"
    message: str


class Catalog:
    """Immutable, id-indexed collection of rhetorical patterns."""

    def __init__(self, patterns: Iterable[RhetoricalPattern]):
        self.patterns: tuple[RhetoricalPattern, ...] = tuple(patterns)
        self._by_id: dict[str, RhetoricalPattern] = {}
        for p in self.patterns:
            if p.id in self._by_id:
                raise CatalogError(f"duplicate pattern id: {p.id}")
            self._by_id[p.id] = p

    def __iter__(self) -> Iterator[RhetoricalPattern]:
        return iter(self.patterns)

    def __len__(self) -> int:
        return len(self.patterns)

    def __contains__(self, pattern_id: str) -> bool:
        return pattern_id in self._by_id

    def get(self, pattern_id: str) -> RhetoricalPattern:
        try:
            return self._by_id[pattern_id]
        except KeyError:
            raise UnknownPatternError(pattern_id) from None

    def for_relation_type(
        self, rel_type: RelationType, include_other: bool = True
    ) -> tuple[RhetoricalPattern, ...]:
        """Patterns applicable to a relation of the given type.

        The catch-all pattern has no relation type and applies to every
        type, so it is appended unless ``include_other`` is false.
        """
        out = [p for p in self.patterns if p.relation_type is rel_type]
        if include_other and OTHER_ID in self._by_id:
            out.append(self._by_id[OTHER_ID])
        return tuple(out)

    def counts_by_relation_type(self) -> dict[RelationType, int]:
        counts = {rt: 0 for rt in RelationType}
        for p in self.patterns:
            if p.relation_type is not None:
                counts[p.relation_type] += 1
        return counts


def _parse_slot(record: Mapping, pattern_id: str) -> SlotSpec:
    name = record.get("name")
    if name not in SLOT_NAMES:
        raise CatalogError(f"{pattern_id}: unknown slot name {name!r}")
    side = record.get("anchored_side", "either")
    if side not in ANCHOR_SIDES:
        raise CatalogError(f"{pattern_id}: unknown anchored_side {side!r}")
    return SlotSpec(name=name, role=record.get("role", ""), anchored_side=side)


def _parse_pattern(record: Mapping) -> RhetoricalPattern:
    pid = record.get("id")
    if not pid or not isinstance(pid, str):
        raise CatalogError(f"pattern record without id: {record!r}")
    try:
        family = PatternFamily(record["family"])
    except (KeyError, ValueError):
        raise CatalogError(f"{pid}: unknown family {record.get('family')!r}") from None
    rel_raw = record.get("relation_type")
    relation_type = RelationType(rel_raw) if rel_raw is not None else None

    slots = tuple(_parse_slot(s, pid) for s in record.get("slots", ()))
    names = [s.name for s in slots]
    if len(set(names)) != len(names):
        raise CatalogError(f"{pid}: duplicate slot names")
    expected = _FAMILY_SLOTS[family]
    if set(names) != expected:
        raise CatalogError(
            f"{pid}: family {family.value} must declare slots "
            f"{sorted(expected)}, got {sorted(names)}"
        )

    ac_raw = record.get("ac")
    ac = None
    if family is PatternFamily.CONSEQUENCES:
        if not ac_raw:
            raise CatalogError(f"{pid}: consequence pattern without polarity parameters")
        try:
            ac = AcParams(
                claim=ValuePolarity(ac_raw["claim"]),
                val_y=ValuePolarity(ac_raw["val_y"]),
                antecedent=AntecedentPolarity(ac_raw["antecedent"]),
                causality=CausalDirection(ac_raw["causality"]),
            )
        except (KeyError, ValueError) as exc:
            raise CatalogError(f"{pid}: bad polarity parameters: {exc}") from None
    elif ac_raw:
        raise CatalogError(f"{pid}: polarity parameters only belong to consequence patterns")

    template = record.get("template", "")
    placeholders = set(_PLACEHOLDER.findall(template))
    if placeholders != set(names):
        raise CatalogError(
            f"{pid}: template placeholders {sorted(placeholders)} do not match "
            f"declared slots {sorted(names)}"
        )

    return RhetoricalPattern(
        id=pid,
        family=family,
        relation_type=relation_type,
        slots=slots,
        ac=ac,
        template=template,
        algebra_exception=bool(record.get("algebra_exception", False)),
    )


def load_catalog(source: str | Path | IO[str] | Iterable[Mapping] | None = None) -> Catalog:
    """Load a pattern catalog.

    ``source`` may be a path to a JSON document, an open text stream,
    an already-parsed record list, or None for the catalog shipped with
    the package. The document is either a bare list of pattern records
    or an object with a ``patterns`` list.
    """
    if source is None:
        with resources.files("earkit.data").joinpath("catalog.json").open(
            "r", encoding="utf-8"
        ) as fh:
            doc = json.load(fh)
    elif isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    elif hasattr(source, "read"):
        doc = json.load(source)
    elif isinstance(source, Mapping):
        doc = source
    else:
        doc = list(source)

    if isinstance(doc, Mapping):
        records = doc.get("patterns", [])
    else:
        records = doc
    if not isinstance(records, list):
        raise CatalogError("catalog document must be a list of pattern records")
    return Catalog(_parse_pattern(r) for r in records)


def derive_relation_type(target_kind: str, ac: AcParams) -> RelationType:
    """Relation type implied by consequence-pattern parameters.

    The product of the y-judgment, causality, and antecedent signs gives
    the judgment of x implied by the explaining side. Aimed at a segment,
    agreement with the asserted claim is support and contradiction is
    rebuttal; aimed at a relation, contradiction is an undercut and
    agreement is rejected (see :class:`NotAnAttackError`).
    """
    if target_kind not in ("segment", "relation"):
        raise ValueError(f"target_kind must be 'segment' or 'relation', got {target_kind!r}")
    implied = ac.implied_sign()
    if target_kind == "segment":
        return RelationType.SUPPORT if implied == ac.claim.sign() else RelationType.REBUTTAL
    if implied == ac.claim.sign():
        raise NotAnAttackError(
            "parameters agree with the targeted relation's claim; not an attack on the link"
        )
    return RelationType.UNDERCUT


def validate_catalog(catalog: Catalog) -> list[CatalogDiagnostic]:
    """Check every consequence pattern against the sign algebra.

    Mismatches on entries flagged ``algebra_exception`` are reported as
    notes (documented, expected); anything else is an error. A stale
    exception flag (the algebra actually agrees) is also a note.
    """
    diagnostics: list[CatalogDiagnostic] = []
    for p in catalog:
        if p.ac is None or p.relation_type is None:
            continue
        target_kind = "relation" if p.relation_type is RelationType.UNDERCUT else "segment"
        try:
            derived: RelationType | None = derive_relation_type(target_kind, p.ac)
        except NotAnAttackError:
            derived = None
        if derived is p.relation_type:
            if p.algebra_exception:
                diagnostics.append(
                    CatalogDiagnostic(
                        p.id, "note", "flagged algebra_exception but the algebra agrees"
                    )
                )
            continue
        derived_name = derived.value if derived is not None else "no attack at all"
        message = (
            f"declared {p.relation_type.value} but sign algebra yields {derived_name}"
        )
        severity = "note" if p.algebra_exception else "error"
        if p.algebra_exception:
            message += " (documented exception)"
        diagnostics.append(CatalogDiagnostic(p.id, severity, message))
    return diagnostics


def semantically_equivalent(a: RhetoricalPattern, b: RhetoricalPattern) -> bool:
    """Whether two patterns count as the same explanation.

    Identical ids are always equivalent. Beyond that, only consequence
    patterns of the same relation type merge, and only when the value
    judgments of both x and y coincide; antecedent and causality shading
    is ignored. Everything else, including the catch-all, stands alone.
    """
    if a.id == b.id:
        return True
    if a.ac is None or b.ac is None:
        return False
    if a.relation_type is not b.relation_type:
        return False
    return a.ac.claim is b.ac.claim and a.ac.val_y is b.ac.val_y


def equivalence_classes(catalog: Catalog) -> tuple[tuple[str, ...], ...]:
    """Partition of the catalog's pattern ids under semantic equivalence.

    Classes and their members are sorted, so the result is deterministic
    for a given catalog.
    """
    remaining = list(catalog.patterns)
    classes: list[tuple[str, ...]] = []
    while remaining:
        head = remaining[0]
        members = [p for p in remaining if semantically_equivalent(head, p)]
        classes.append(tuple(sorted(p.id for p in members)))
        remaining = [p for p in remaining if not semantically_equivalent(head, p)]
    return tuple(sorted(classes))


def equivalence_class_map(catalog: Catalog) -> dict[str, str]:
    """Map each pattern id to a canonical representative of its class."""
    out: dict[str, str] = {}
    for members in equivalence_classes(catalog):
        rep = members[0]
        for m in members:
            out[m] = rep
    return out


def pattern_to_dict(pattern: RhetoricalPattern) -> dict:
    """Plain-data form of a pattern (catalog export, HTTP payloads)."""
    return {
        "id": pattern.id,
        "family": pattern.family.value,
        "relation_type": pattern.relation_type.value if pattern.relation_type else None,
        "slots": [
            {"name": s.name, "role": s.role, "anchored_side": s.anchored_side}
            for s in pattern.slots
        ],
        "ac": None
        if pattern.ac is None
        else {
            "claim": pattern.ac.claim.value,
            "val_y": pattern.ac.val_y.value,
            "antecedent": pattern.ac.antecedent.value,
            "causality": pattern.ac.causality.value,
        },
        "template": pattern.template,
        "algebra_exception": pattern.algebra_exception,
    }


def render_explanation(pattern: RhetoricalPattern, fills: Mapping[str, str]) -> str:
    """Substitute slot fills into the pattern's explanation template.

    Every declared slot must be filled; fills for undeclared slots are
    ignored. Substitution is a single pass, so fill text containing
    placeholder-like braces is emitted verbatim.
    """
    if not pattern.slots:
        return pattern.template

    declared = set(pattern.slot_names)

    def _sub(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in declared:
            return match.group(0)
        if name not in fills:
            raise MissingSlotFillError(f"{pattern.id}: no fill for slot {name!r}")
        return fills[name]

    return _PLACEHOLDER.sub(_sub, pattern.template)
