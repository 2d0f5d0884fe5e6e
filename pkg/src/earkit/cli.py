"""Command-line interface.

Subcommands: ``convert`` (corpus XML + optional standoff annotations ->
project file), ``validate``, ``stats``, ``agreement``, ``coverage``,
``render``, and ``serve``. Reports go to stdout, diagnostics to stderr;
the exit code is 0 only when no error-level diagnostic was produced.
Given identical inputs and the same seed, output is byte-identical
across runs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agreement import agreement_report, run_pipeline
from .brat import BratFormatError, read_brat_annotations
from .corpus import (
    DEFAULT_SEED,
    CorpusError,
    Diagnostic,
    Project,
    ProjectFormatError,
    load_corpus_dir,
    load_project,
    parse_microtext_file,
    save_project,
)
from .patterns import Catalog, CatalogError, load_catalog, render_explanation
from .reporting import corpus_summary, pattern_distribution, relation_distribution

SPLIT_CHOICES = ("dev", "test", "all")


def _split_arg(value: str | None) -> str | None:
    return None if value in (None, "all") else value


def _load_catalog(path: str | None) -> Catalog:
    return load_catalog(path) if path else load_catalog()


def _emit_diagnostics(diags) -> bool:
    """Print diagnostics to stderr; true when any is an error."""
    failed = False
    for d in diags:
        print(d.format(), file=sys.stderr)
        failed = failed or d.is_error
    return failed


def _dump_structured(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


# --- convert ---------------------------------------------------------------

def _read_split_file(path: str) -> dict[str, str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise ProjectFormatError("split file must map text id to 'dev' or 'test'")
    for text_id, part in doc.items():
        if part not in ("dev", "test"):
            raise ProjectFormatError(f"bad split value {part!r} for {text_id!r}")
    return doc


def cmd_convert(args) -> int:
    catalog = _load_catalog(args.catalog)
    texts, notes = load_corpus_dir(args.corpus)
    _emit_diagnostics(notes)

    split = (
        _read_split_file(args.split_file)
        if args.split_file
        else {mt.id: "test" for mt in texts}
    )
    missing = [mt.id for mt in texts if mt.id not in split]
    if missing:
        print(f"error: split file misses texts: {missing}", file=sys.stderr)
        return 1

    annotators: list[str] = []
    annotations = []
    if args.annotations:
        ann_root = Path(args.annotations)
        annotators = sorted(p.name for p in ann_root.iterdir() if p.is_dir())
        by_id = {mt.id: mt for mt in texts}
        for annotator in annotators:
            for ann_path in sorted((ann_root / annotator).glob("*.ann")):
                mt = by_id.get(ann_path.stem)
                if mt is None:
                    print(
                        f"warning: {ann_path} does not match any corpus text",
                        file=sys.stderr,
                    )
                    continue
                annotations.extend(
                    read_brat_annotations(
                        mt,
                        ann_path.read_text(encoding="utf-8"),
                        catalog,
                        annotator=annotator,
                    )
                )
    if args.annotators:
        annotators = [a.strip() for a in args.annotators.split(",") if a.strip()]

    project = Project(
        corpus=tuple(texts),
        annotators=tuple(annotators),
        annotations=tuple(annotations),
        split={mt.id: split[mt.id] for mt in texts},
        seed=args.seed,
    )
    save_project(project, args.project)
    print(
        f"converted {len(texts)} texts, "
        f"{sum(len(mt.relations) for mt in texts)} relations, "
        f"{len(annotations)} annotations -> {args.project}"
    )
    return 0


# --- validate --------------------------------------------------------------

def cmd_validate(args) -> int:
    catalog = _load_catalog(args.catalog)
    failed = False
    if args.corpus:
        count = 0
        paths = sorted(Path(args.corpus).rglob("*.xml"))
        for path in paths:
            try:
                parse_microtext_file(path)
                count += 1
            except CorpusError as exc:
                failed = True
                print(f"error: {path}: {exc}", file=sys.stderr)
        print(f"texts: {count}")
    if args.project:
        project = load_project(args.project)
        diags = project.validate(catalog)
        failed = _emit_diagnostics(diags) or failed
        errors = sum(1 for d in diags if d.is_error)
        warnings = len(diags) - errors
        print(f"annotations: {len(project.annotations)}")
        print(f"errors: {errors}")
        print(f"warnings: {warnings}")
    if not args.corpus and not args.project:
        print("error: validate needs --corpus and/or --project", file=sys.stderr)
        return 2
    return 1 if failed else 0


# --- stats -----------------------------------------------------------------

def cmd_stats(args) -> int:
    catalog = _load_catalog(args.catalog)
    project = load_project(args.project)
    split = _split_arg(args.split)
    summary = corpus_summary(project)
    rel_table = relation_distribution(project)
    pat_table = pattern_distribution(
        project, catalog, stage=args.stage, per_annotator=args.per_annotator,
        split=split, seed=args.seed,
    )

    if args.format == "structured":
        _dump_structured(
            {
                "summary": summary,
                "relation_distribution": rel_table.to_dict(),
                "pattern_distribution": pat_table.to_dict(),
            }
        )
    elif args.format == "csv":
        print(rel_table.to_csv())
        print(pat_table.to_csv(), end="")
    else:
        print(f"texts: {summary['texts']}")
        print(f"relations: {summary['relations']}")
        print(f"annotations: {summary['annotations']}")
        print(rel_table.to_text())
        if project.annotations:
            print(pat_table.to_text())

    if args.figures:
        from .figures import save_distribution_figure

        outdir = Path(args.figures)
        outdir.mkdir(parents=True, exist_ok=True)
        save_distribution_figure(rel_table, outdir / "relation_distribution.png")
        save_distribution_figure(pat_table, outdir / "pattern_distribution.png")
    return 0


# --- agreement & coverage ----------------------------------------------------

def cmd_agreement(args) -> int:
    catalog = _load_catalog(args.catalog)
    project = load_project(args.project)
    report = agreement_report(
        project,
        catalog,
        split=_split_arg(args.split),
        seed=args.seed,
        kappa_mode=args.kappa_mode,
    )
    if args.format == "structured":
        _dump_structured(report.to_dict())
    elif args.format == "csv":
        print("stage,compared,settled,ratio,kappa,coverage_covered,coverage_total")
        for s in report.stages:
            ratio = f"{s.ratio:.6f}" if s.ratio is not None else ""
            kappa = f"{s.kappa:.6f}" if s.kappa is not None else ""
            print(
                f"{s.stage},{s.compared},{s.settled},{ratio},{kappa},"
                f"{s.pattern_coverage.covered},{s.pattern_coverage.total}"
            )
    else:
        print(report.to_text())

    if args.figures:
        from .figures import save_agreement_figure

        outdir = Path(args.figures)
        outdir.mkdir(parents=True, exist_ok=True)
        save_agreement_figure(report, outdir / "agreement.png")
    return 0


def cmd_coverage(args) -> int:
    catalog = _load_catalog(args.catalog)
    project = load_project(args.project)
    report = agreement_report(
        project, catalog, split=_split_arg(args.split), seed=args.seed
    )
    stages = [report.stage(args.stage)] if args.stage else list(report.stages)
    if args.format == "structured":
        _dump_structured(
            {
                "coverage": [
                    {
                        "stage": s.stage,
                        "covered": s.pattern_coverage.covered,
                        "total": s.pattern_coverage.total,
                        "ratio": s.pattern_coverage.ratio,
                    }
                    for s in stages
                ]
            }
        )
    else:
        for s in stages:
            cov = s.pattern_coverage
            ratio = f"{100 * cov.ratio:.1f}%" if cov.ratio is not None else "undefined"
            print(f"stage {s.stage}: {cov.covered}/{cov.total} ({ratio})")
    return 0


# --- render ------------------------------------------------------------------

def cmd_render(args) -> int:
    catalog = _load_catalog(args.catalog)
    project = load_project(args.project)
    annotation = None
    if args.annotator:
        annotation = next(
            (
                a
                for a in project.annotations
                if a.relation_id == args.relation
                and a.annotator == args.annotator
                and a.stage == args.stage
            ),
            None,
        )
    else:
        pipeline = run_pipeline(project, catalog, seed=args.seed)
        annotation = pipeline.chosen_annotation(args.relation, stage=3)
        if annotation is None:
            candidates = [
                a for a in project.annotations if a.relation_id == args.relation
            ]
            annotation = candidates[0] if len(candidates) == 1 else None
    if annotation is None:
        print(f"error: no annotation found for {args.relation!r}", file=sys.stderr)
        return 1
    pattern = catalog.get(annotation.pattern_id)
    fills = {f.slot: f.text for f in annotation.fills}
    print(render_explanation(pattern, fills))
    return 0


# --- serve -------------------------------------------------------------------

def cmd_serve(args) -> int:
    from .service import serve

    catalog = _load_catalog(args.catalog)
    serve(args.project, bind_address=args.bind, catalog=catalog)
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="earkit",
        description="annotate and analyze explanations of argumentative relations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, project_required=True):
        p.add_argument("--project", required=project_required, help="project file")
        p.add_argument("--catalog", help="pattern catalog JSON (default: shipped)")
        p.add_argument(
            "--format",
            choices=("text", "csv", "structured"),
            default="text",
            help="output format",
        )
        p.add_argument("--seed", type=int, default=None, help="seed for random picks")
        p.add_argument("--split", choices=SPLIT_CHOICES, default="all")

    p = sub.add_parser("convert", help="build a project from corpus XML")
    p.add_argument("--corpus", required=True, help="directory of microtext XML files")
    p.add_argument("--project", required=True, help="output project file")
    p.add_argument("--annotations", help="directory of <annotator>/<text id>.ann files")
    p.add_argument("--annotators", help="comma-separated annotator ids")
    p.add_argument("--split-file", help="JSON file mapping text id to dev/test")
    p.add_argument("--catalog", help="pattern catalog JSON (default: shipped)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="validate corpus files and/or a project")
    p.add_argument("--corpus", help="directory of microtext XML files")
    p.add_argument("--project", help="project file")
    p.add_argument("--catalog", help="pattern catalog JSON (default: shipped)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="relation and pattern distributions")
    add_common(p)
    p.add_argument("--stage", type=int, default=3, help="stage for pattern counts")
    p.add_argument("--per-annotator", action="store_true")
    p.add_argument("--figures", help="directory for rendered charts")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("agreement", help="per-stage agreement report")
    add_common(p)
    p.add_argument("--kappa-mode", choices=("resolved", "original"), default="resolved")
    p.add_argument("--figures", help="directory for rendered charts")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("coverage", help="pattern coverage per stage")
    add_common(p)
    p.add_argument("--stage", type=int, choices=(1, 2, 3), default=None)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("render", help="render the explanation of one relation")
    add_common(p)
    p.add_argument("relation", help="qualified relation id, e.g. micro_f001/c1")
    p.add_argument("--annotator", help="render this annotator's annotation")
    p.add_argument("--stage", type=int, default=1, help="annotation stage to render")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--project", required=True, help="project store directory")
    p.add_argument("--catalog", help="pattern catalog JSON (default: shipped)")
    p.add_argument("--bind", default="127.0.0.1:8765", help="host:port to bind")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, CatalogError, ProjectFormatError, BratFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
