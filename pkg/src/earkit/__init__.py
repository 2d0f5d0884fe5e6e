"""earkit: annotate and analyze explanations of argumentative relations.

The package ships a catalog of rhetorical patterns (consequence,
analogy, presupposition, proposition, quantifier frames), parses the
argumentative microtext XML corpus and standoff annotation files, runs
the three-stage agreement workflow with Cohen's kappa and pattern
coverage, and serves an HTTP API for interactive annotation.
"""

from .agreement import (
    AgreementReport,
    AgreementVerdict,
    Coverage,
    DiscussionOutcome,
    agreement_report,
    cohen_kappa,
    compare_stage1,
    coverage,
    resolve_stage2,
    resolve_stage3,
    run_pipeline,
    spans_overlap,
)
from .brat import parse_brat, parse_standoff, read_brat_annotations
from .corpus import (
    ArgRelation,
    ClueTag,
    CrossCheckResponse,
    Diagnostic,
    EarAnnotation,
    Microtext,
    Project,
    Resolution,
    Segment,
    SlotFill,
    Span,
    load_corpus_dir,
    load_project,
    parse_microtext,
    relation_key,
    save_project,
    validate_annotation,
)
from .patterns import (
    AcParams,
    AntecedentPolarity,
    Catalog,
    CausalDirection,
    PatternFamily,
    RelationType,
    RhetoricalPattern,
    SlotSpec,
    ValuePolarity,
    derive_relation_type,
    equivalence_class_map,
    equivalence_classes,
    load_catalog,
    render_explanation,
    semantically_equivalent,
    validate_catalog,
)
from .reporting import (
    DistributionTable,
    clue_table,
    corpus_summary,
    pattern_distribution,
    relation_distribution,
)

__version__ = "0.1.0"
