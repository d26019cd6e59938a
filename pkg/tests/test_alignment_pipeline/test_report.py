"""Tests for report tables and charts."""

import pytest

from alignment_pipeline.errors import FormatError
from alignment_pipeline.models import AlignmentScore, ScoreRow
from alignment_pipeline.report import (
    REPORT_COLUMNS,
    comparison_table,
    emit_reports,
    format_score_report,
    layer_table,
    read_train_log,
    write_csv,
)


def _make_score(error: float) -> AlignmentScore:
    return AlignmentScore(aer=error, precision=1 - error, recall=1 - error, hyp_count=10, sure_count=10, possible_count=12)


def _make_rows():
    return [
        ScoreRow(model="layer-average", aer=0.4, precision=0.6, recall=0.6, hyp_count=10, sure_count=10, possible_count=12),
        ScoreRow(
            model="multitask", aer=0.1, precision=0.9, recall=0.9, hyp_count=10, sure_count=10, possible_count=12,
            p_value=1e-4, baseline="layer-average",
        ),
    ]


class TestTables:
    def test_comparison_columns(self):
        frame = comparison_table(_make_rows())
        assert list(frame.columns) == REPORT_COLUMNS
        assert frame["|A|"].tolist() == [10, 10]

    def test_empty_comparison(self):
        frame = comparison_table([])
        assert frame.empty
        assert list(frame.columns) == REPORT_COLUMNS

    def test_layer_table_keeps_order(self):
        frame = layer_table({"1": _make_score(0.5), "2": _make_score(0.3), "average": _make_score(0.4)})
        assert frame["layer"].tolist() == ["1", "2", "average"]

    def test_csv_uses_crlf(self, tmp_path):
        write_csv(comparison_table(_make_rows()), tmp_path / "c.csv")
        raw = (tmp_path / "c.csv").read_bytes()
        assert raw.count(b"\r\n") == 3
        assert b"0.400000" in raw

    def test_score_report_text(self):
        text = format_score_report(_make_rows())
        lines = text.splitlines()
        assert lines[0].split("\t") == REPORT_COLUMNS
        assert lines[1].startswith("layer-average\t0.4000")
        assert lines[2].endswith("\tlayer-average")


class TestTrainLog:
    def test_read(self, tmp_path):
        path = tmp_path / "log.tsv"
        path.write_text("1\t2.5\t0.1\t2.505\t0.0001\n2\t2.4\t0.0\t2.4\t0.0002\n", encoding="utf-8")
        log = read_train_log(path)
        assert log["step"].tolist() == [1, 2]
        assert log["L"].tolist() == pytest.approx([2.505, 2.4])

    def test_unreadable(self, tmp_path):
        path = tmp_path / "log.tsv"
        path.write_text("1\t2\n3\t4\t5\t6\t7\t8\t9\n", encoding="utf-8")
        with pytest.raises(FormatError):
            read_train_log(path)


class TestEmitReports:
    def test_writes_everything_with_data(self, tmp_path):
        per_layer = {"1": _make_score(0.5), "2": _make_score(0.3), "average": _make_score(0.4)}
        epochs = {
            "baseline": [{"epoch": 1, "train_loss": 3.0, "valid_loss": 2.9, "valid_aer": 0.6}],
            "multitask": [
                {"epoch": 1, "train_loss": 3.1, "valid_loss": 3.0, "valid_aer": 0.5},
                {"epoch": 2, "train_loss": 2.5, "valid_loss": 2.4, "valid_aer": 0.3},
            ],
        }
        written = emit_reports(tmp_path, per_layer, _make_rows(), epochs)
        names = sorted(p.rsplit("/", 1)[-1] for p in written)
        assert names == [
            "aer_per_layer.csv", "aer_per_layer.svg", "aer_vs_epoch.csv", "aer_vs_epoch.svg", "comparison.csv", "scores.tsv",
        ]
        svg = (tmp_path / "aer_per_layer.svg").read_text(encoding="utf-8")
        assert svg.lstrip().startswith("<?xml")
        assert "<svg" in svg
        scores = (tmp_path / "scores.tsv").read_text(encoding="utf-8").splitlines()
        assert scores[2].split("\t")[:2] == ["multitask", "0.100000"]

    def test_svg_is_reproducible(self, tmp_path):
        per_layer = {"1": _make_score(0.5), "average": _make_score(0.5)}
        emit_reports(tmp_path / "a", per_layer)
        emit_reports(tmp_path / "b", per_layer)
        assert (tmp_path / "a" / "aer_per_layer.svg").read_bytes() == (tmp_path / "b" / "aer_per_layer.svg").read_bytes()

    def test_nothing_to_write(self, tmp_path):
        assert emit_reports(tmp_path) == []
