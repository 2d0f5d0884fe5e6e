import itertools
import json
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from earkit.patterns import (
    AcParams,
    AntecedentPolarity,
    Catalog,
    CatalogError,
    CausalDirection,
    MissingSlotFillError,
    NotAnAttackError,
    PatternFamily,
    RelationType,
    ValuePolarity,
    derive_relation_type,
    equivalence_class_map,
    equivalence_classes,
    load_catalog,
    render_explanation,
    semantically_equivalent,
    validate_catalog,
)

AC_IDS = {f"S{i:02d}" for i in range(1, 9)} | {f"R{i:02d}" for i in range(1, 9)} | {
    f"U{i:02d}" for i in range(1, 9)
}
ANALOGY_IDS = {"S09", "S10", "R09", "R10"}
PRESUP_IDS = {"S11", "R11", "U10"}
PROP_IDS = {"S12", "R12"}
QUANT_IDS = {"U09"}


def record(pid, **overrides):
    base = {
        "id": pid,
        "family": "consequences",
        "relation_type": "support",
        "slots": [
            {"name": "x", "role": "", "anchored_side": "target"},
            {"name": "y", "role": "", "anchored_side": "source"},
        ],
        "ac": {
            "claim": "good",
            "val_y": "good",
            "antecedent": "happens",
            "causality": "promote",
        },
        "template": "{x} and {y}.",
        "algebra_exception": False,
    }
    base.update(overrides)
    return base


class TestLoadCatalog:
    def test_shipped_shape(self, catalog):
        assert len(catalog) == 35
        counts = catalog.counts_by_relation_type()
        assert counts[RelationType.SUPPORT] == 12
        assert counts[RelationType.REBUTTAL] == 12
        assert counts[RelationType.UNDERCUT] == 10
        assert "OTHER" in catalog
        assert catalog.get("OTHER").relation_type is None

    def test_shipped_family_membership(self, catalog):
        by_family = {}
        for p in catalog:
            by_family.setdefault(p.family, set()).add(p.id)
        assert by_family[PatternFamily.CONSEQUENCES] == AC_IDS
        assert by_family[PatternFamily.ANALOGY] == ANALOGY_IDS
        assert by_family[PatternFamily.PRESUPPOSITION] == PRESUP_IDS
        assert by_family[PatternFamily.PROPOSITION] == PROP_IDS
        assert by_family[PatternFamily.QUANTIFIER] == QUANT_IDS
        assert by_family[PatternFamily.OTHER] == {"OTHER"}

    def test_empty_document(self):
        assert len(load_catalog([])) == 0
        assert len(load_catalog({"patterns": []})) == 0

    def test_duplicate_id_rejected(self):
        with pytest.raises(CatalogError, match="duplicate"):
            load_catalog([record("S01"), record("S01")])

    def test_missing_ac_params_rejected(self):
        with pytest.raises(CatalogError, match="polarity"):
            load_catalog([record("S01", ac=None)])

    def test_unknown_slot_name_rejected(self):
        bad = record(
            "S01",
            slots=[
                {"name": "z", "role": "", "anchored_side": "target"},
                {"name": "y", "role": "", "anchored_side": "source"},
            ],
        )
        with pytest.raises(CatalogError, match="slot"):
            load_catalog([bad])

    def test_template_placeholders_must_match_slots(self):
        with pytest.raises(CatalogError, match="placeholder"):
            load_catalog([record("S01", template="{x} only.")])

    def test_loads_from_path(self, tmp_path):
        path = tmp_path / "cat.json"
        path.write_text(json.dumps([record("S01")]), encoding="utf-8")
        assert len(load_catalog(path)) == 1


class TestSignAlgebra:
    def test_support_anchor(self):
        ac = AcParams(
            ValuePolarity.GOOD,
            ValuePolarity.GOOD,
            AntecedentPolarity.HAPPENS,
            CausalDirection.PROMOTE,
        )
        assert derive_relation_type("segment", ac) is RelationType.SUPPORT

    def test_rebuttal_anchor(self):
        ac = AcParams(
            ValuePolarity.GOOD,
            ValuePolarity.BAD,
            AntecedentPolarity.HAPPENS,
            CausalDirection.PROMOTE,
        )
        assert derive_relation_type("segment", ac) is RelationType.REBUTTAL

    def test_undercut_anchor(self):
        ac = AcParams(
            ValuePolarity.GOOD,
            ValuePolarity.GOOD,
            AntecedentPolarity.HAPPENS,
            CausalDirection.SUPPRESS,
        )
        assert derive_relation_type("relation", ac) is RelationType.UNDERCUT

    def test_relation_target_rejects_supportive_params(self):
        ac = AcParams(
            ValuePolarity.GOOD,
            ValuePolarity.GOOD,
            AntecedentPolarity.HAPPENS,
            CausalDirection.PROMOTE,
        )
        with pytest.raises(NotAnAttackError):
            derive_relation_type("relation", ac)

    def test_bad_target_kind(self):
        ac = AcParams(
            ValuePolarity.GOOD,
            ValuePolarity.GOOD,
            AntecedentPolarity.HAPPENS,
            CausalDirection.PROMOTE,
        )
        with pytest.raises(ValueError):
            derive_relation_type("edge", ac)

    def test_sixteen_combinations_partition_eight_eight(self):
        outcomes = []
        for claim, val_y, ant, caus in itertools.product(
            ValuePolarity, ValuePolarity, AntecedentPolarity, CausalDirection
        ):
            outcomes.append(
                derive_relation_type("segment", AcParams(claim, val_y, ant, caus))
            )
        assert len(outcomes) == 16
        assert outcomes.count(RelationType.SUPPORT) == 8
        assert outcomes.count(RelationType.REBUTTAL) == 8

    def test_total_and_deterministic(self):
        for params in itertools.product(
            ValuePolarity, ValuePolarity, AntecedentPolarity, CausalDirection
        ):
            ac = AcParams(*params)
            assert derive_relation_type("segment", ac) is derive_relation_type(
                "segment", ac
            )


class TestValidateCatalog:
    def test_shipped_catalog_only_documented_exceptions(self, catalog):
        diags = validate_catalog(catalog)
        assert all(d.severity == "note" for d in diags)
        flagged = {p.id for p in catalog if p.algebra_exception}
        assert {d.pattern_id for d in diags} == flagged == {"S02"}

    def test_single_consistent_pattern_is_clean(self, catalog):
        sub = Catalog([catalog.get("S01")])
        assert validate_catalog(sub) == []

    def test_forced_mismatch_reported(self, catalog):
        s01 = catalog.get("S01")
        import dataclasses

        broken = dataclasses.replace(s01, relation_type=RelationType.REBUTTAL)
        diags = validate_catalog(Catalog([broken]))
        assert len(diags) == 1
        assert diags[0].severity == "error"
        assert diags[0].pattern_id == "S01"


class TestEquivalence:
    def test_s01_s02_equivalent(self, catalog):
        assert semantically_equivalent(catalog.get("S01"), catalog.get("S02"))

    def test_identity(self, catalog):
        for p in catalog:
            assert semantically_equivalent(p, p)

    def test_r01_r03_not_equivalent(self, catalog):
        # value judgment of y differs: good vs bad
        assert not semantically_equivalent(catalog.get("R01"), catalog.get("R03"))

    def test_never_crosses_relation_types(self, catalog):
        for a in catalog:
            for b in catalog:
                if a.relation_type is not b.relation_type:
                    assert not semantically_equivalent(a, b)

    def test_relation_is_reflexive_symmetric_transitive(self, catalog):
        pats = list(catalog)
        for a in pats:
            assert semantically_equivalent(a, a)
            for b in pats:
                assert semantically_equivalent(a, b) == semantically_equivalent(b, a)
        for a in pats:
            for b in pats:
                if not semantically_equivalent(a, b):
                    continue
                for c in pats:
                    if semantically_equivalent(b, c):
                        assert semantically_equivalent(a, c)

    def test_classes_form_partition(self, catalog):
        classes = equivalence_classes(catalog)
        members = [pid for cls in classes for pid in cls]
        assert sorted(members) == sorted(p.id for p in catalog)
        assert len(members) == len(set(members))

    def test_classes_match_pairwise_relation(self, catalog):
        class_of = equivalence_class_map(catalog)
        for a in catalog:
            for b in catalog:
                same = class_of[a.id] == class_of[b.id]
                assert same == semantically_equivalent(a, b)

    def test_non_consequence_patterns_are_singletons(self, catalog):
        class_of = equivalence_class_map(catalog)
        for cls in equivalence_classes(catalog):
            first = catalog.get(cls[0])
            if first.ac is None:
                assert len(cls) == 1
        assert class_of["OTHER"] == "OTHER"

    def test_single_pattern_catalog(self, catalog):
        sub = Catalog([catalog.get("S05")])
        assert equivalence_classes(sub) == (("S05",),)


class TestRenderExplanation:
    def test_rebuttal_consequence_example(self, catalog):
        text = render_explanation(
            catalog.get("R03"),
            {
                "x": "be able to shop on weekends",
                "y": "other people have to work on the weekend",
            },
        )
        assert "be able to shop on weekends is good" in text
        assert "be able to shop on weekends is bad" in text
        assert "other people have to work on the weekend is bad" in text
        assert "will be promoted" in text
        assert not re.search(r"\{[a-z]\}", text)

    def test_other_fixed_sentence(self, catalog):
        other = catalog.get("OTHER")
        assert render_explanation(other, {}) == other.template
        assert "No predefined rhetorical pattern" in render_explanation(other, {})

    def test_quantifier_example(self, catalog):
        text = render_explanation(catalog.get("U09"), {"q": "all intelligent services"})
        assert "assumes the quantifier all intelligent services" in text
        assert "disagrees" in text

    def test_missing_fill_raises(self, catalog):
        with pytest.raises(MissingSlotFillError):
            render_explanation(catalog.get("S01"), {"x": "parks"})

    def test_extra_fills_ignored(self, catalog):
        text = render_explanation(
            catalog.get("S11"), {"p": "dogs are at fault", "x": "unused"}
        )
        assert "dogs are at fault" in text
        assert "unused" not in text

    @given(
        x=st.text(min_size=1, max_size=30),
        y=st.text(min_size=1, max_size=30),
    )
    def test_fills_appear_verbatim(self, x, y):
        catalog = load_catalog()
        for pid in ("S01", "R03", "U05"):
            text = render_explanation(catalog.get(pid), {"x": x, "y": y})
            assert x in text
            assert y in text
