import json

import pytest

from earkit import load_project
from earkit.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def converted(tmp_path, corpus_dir, ann_dir, capsys):
    project_path = tmp_path / "demo.json"
    code, out, err = run(
        capsys,
        "convert",
        "--corpus",
        str(corpus_dir),
        "--annotations",
        str(ann_dir),
        "--project",
        str(project_path),
    )
    assert code == 0, err
    return project_path


class TestConvert:
    def test_builds_project(self, converted, capsys):
        project = load_project(converted)
        assert len(project.corpus) == 3
        assert sum(len(mt.relations) for mt in project.corpus) == 8
        assert project.annotators == ("ann1", "ann2")
        assert len(project.annotations) == 4
        assert set(project.split.values()) == {"test"}

    def test_split_file(self, tmp_path, corpus_dir, capsys):
        split_path = tmp_path / "split.json"
        split_path.write_text(
            json.dumps(
                {"micro_f001": "dev", "micro_f002": "test", "micro_f004": "test"}
            ),
            encoding="utf-8",
        )
        project_path = tmp_path / "p.json"
        code, out, _ = run(
            capsys,
            "convert",
            "--corpus",
            str(corpus_dir),
            "--project",
            str(project_path),
            "--split-file",
            str(split_path),
        )
        assert code == 0
        project = load_project(project_path)
        assert project.split["micro_f001"] == "dev"

    def test_reports_excluded_topicless_text(self, tmp_path, corpus_dir, capsys):
        code, out, err = run(
            capsys,
            "convert",
            "--corpus",
            str(corpus_dir),
            "--project",
            str(tmp_path / "p.json"),
        )
        assert code == 0
        assert "no topic question" in err
        assert "converted 3 texts, 8 relations" in out


class TestValidate:
    def test_empty_directory_ok(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        code, out, _ = run(capsys, "validate", "--corpus", str(empty))
        assert code == 0
        assert "texts: 0" in out

    def test_corpus_counts_all_texts(self, corpus_dir, capsys):
        code, out, _ = run(capsys, "validate", "--corpus", str(corpus_dir))
        assert code == 0
        assert "texts: 4" in out

    def test_broken_corpus_fails(self, tmp_path, capsys):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "x.xml").write_text("<arggraph", encoding="utf-8")
        code, out, err = run(capsys, "validate", "--corpus", str(bad))
        assert code == 1
        assert "error" in err

    def test_project_validation(self, converted, capsys):
        code, out, err = run(capsys, "validate", "--project", str(converted))
        assert code == 0
        assert "errors: 0" in out

    def test_no_inputs_is_usage_error(self, capsys):
        code, _, err = run(capsys, "validate")
        assert code == 2

    def test_invalid_project_annotation_fails(self, converted, tmp_path, capsys):
        doc = json.loads(converted.read_text(encoding="utf-8"))
        doc["annotations"][0]["pattern_id"] = "Z99"
        broken = tmp_path / "broken.json"
        broken.write_text(json.dumps(doc), encoding="utf-8")
        code, out, err = run(capsys, "validate", "--project", str(broken))
        assert code == 1
        assert "unknown-pattern" in err


class TestStats:
    def test_text_format(self, converted, capsys):
        code, out, _ = run(capsys, "stats", "--project", str(converted))
        assert code == 0
        assert "texts: 3" in out
        assert "relations: 8" in out
        assert "support" in out

    def test_csv_format(self, converted, capsys):
        code, out, _ = run(
            capsys, "stats", "--project", str(converted), "--format", "csv"
        )
        assert code == 0
        assert out.splitlines()[0] == "label,all,test"

    def test_structured_format(self, converted, capsys):
        code, out, _ = run(
            capsys, "stats", "--project", str(converted), "--format", "structured"
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["summary"]["relations"] == 8

    def test_figures_written(self, converted, tmp_path, capsys):
        figdir = tmp_path / "figs"
        code, _, _ = run(
            capsys,
            "stats",
            "--project",
            str(converted),
            "--figures",
            str(figdir),
        )
        assert code == 0
        assert (figdir / "relation_distribution.png").stat().st_size > 0
        assert (figdir / "pattern_distribution.png").stat().st_size > 0


class TestAgreement:
    def test_report_text(self, converted, capsys):
        code, out, _ = run(capsys, "agreement", "--project", str(converted))
        assert code == 0
        assert "stage 1: agreed 1/2" in out
        assert "stage 2" in out and "stage 3" in out

    def test_deterministic_output(self, converted, capsys):
        _, first, _ = run(
            capsys, "agreement", "--project", str(converted), "--seed", "7"
        )
        _, second, _ = run(
            capsys, "agreement", "--project", str(converted), "--seed", "7"
        )
        assert first == second

    def test_csv(self, converted, capsys):
        code, out, _ = run(
            capsys, "agreement", "--project", str(converted), "--format", "csv"
        )
        assert code == 0
        assert out.splitlines()[0].startswith("stage,compared,settled")
        assert len(out.splitlines()) == 4

    def test_figures(self, converted, tmp_path, capsys):
        figdir = tmp_path / "afigs"
        code, _, _ = run(
            capsys,
            "agreement",
            "--project",
            str(converted),
            "--figures",
            str(figdir),
        )
        assert code == 0
        assert (figdir / "agreement.png").stat().st_size > 0


class TestCoverageCommand:
    def test_all_stages(self, converted, capsys):
        code, out, _ = run(capsys, "coverage", "--project", str(converted))
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 3
        assert lines[0].startswith("stage 1:")

    def test_single_stage_structured(self, converted, capsys):
        code, out, _ = run(
            capsys,
            "coverage",
            "--project",
            str(converted),
            "--stage",
            "1",
            "--format",
            "structured",
        )
        assert code == 0
        doc = json.loads(out)
        assert len(doc["coverage"]) == 1
        assert doc["coverage"][0]["stage"] == 1


class TestRender:
    def test_renders_fixture_annotation(self, converted, capsys):
        code, out, _ = run(
            capsys,
            "render",
            "--project",
            str(converted),
            "micro_f001/c1",
            "--annotator",
            "ann1",
        )
        assert code == 0
        assert "be able to shop on weekends" in out
        assert "{x}" not in out and "{y}" not in out

    def test_renders_resolved_choice_by_default(self, converted, capsys):
        code, out, _ = run(
            capsys, "render", "--project", str(converted), "micro_f001/c1"
        )
        assert code == 0
        assert "shop on weekends" in out

    def test_unknown_relation_fails(self, converted, capsys):
        code, _, err = run(
            capsys, "render", "--project", str(converted), "micro_f001/c99"
        )
        assert code == 1
        assert "no annotation" in err


class TestExitCodes:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_missing_project_file_exits_1(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "stats", "--project", str(tmp_path / "missing.json")
        )
        assert code == 1
        assert "error" in err
