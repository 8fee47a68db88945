"""
Tests for the column-group CSV writer.
"""

import io

import pytest

from src.lordnet.csv_writer import (
    AUDIT_COLUMNS,
    EVAL_COLUMNS,
    LOSS_CURVE_COLUMNS,
    AuditRecord,
    ErrorRecord,
    LossRecord,
    TableWriter,
    format_real,
)


class TestFormatReal:
    """Test cases for float formatting."""

    @pytest.mark.parametrize("value", [0.1, 1e-300, 1.0 / 3.0, -2.5e17])
    def test_parses_back_exactly(self, value):
        """Test that the text form round-trips through float."""
        assert float(format_real(value)) == value

    def test_none_is_empty(self):
        """Test that missing values become empty cells."""
        assert format_real(None) == ""


class TestTableWriter:
    """Test cases for writing the three result tables."""

    def _render(self, columns, records):
        stream = io.StringIO()
        TableWriter(columns).write(records, stream)
        return stream.getvalue().splitlines()

    def test_loss_curve(self):
        """Test the loss-curve header and rows."""
        lines = self._render(LOSS_CURVE_COLUMNS, [LossRecord(0, 1e-3, 0.5), LossRecord(100, 8e-4, 0.25)])
        assert lines == ["iteration,lr,loss", "0,0.001,0.5", "100,0.0008,0.25"]

    def test_eval_table(self):
        """Test the per-sample error table."""
        lines = self._render(EVAL_COLUMNS, [ErrorRecord(3, 0.125)])
        assert lines == ["sample_id,error", "3,0.125"]

    def test_audit_table(self):
        """Test the solver audit table with a failed sample."""
        records = [
            AuditRecord(0, 1e-12, 17, True),
            AuditRecord(1, None, None, False, "not converged"),
        ]
        lines = self._render(AUDIT_COLUMNS, records)
        assert lines[0] == "sample_id,max_residual,cg_iterations,converged,message"
        assert lines[1] == "0,1e-12,17,true,"
        assert lines[2] == "1,,,false,not converged"

    def test_empty_table_has_header(self):
        """Test that no records still gives a header line."""
        assert self._render(EVAL_COLUMNS, []) == ["sample_id,error"]

    def test_write_file(self, tmp_path):
        """Test writing straight to a path."""
        path = tmp_path / "loss_curve.csv"
        TableWriter(LOSS_CURVE_COLUMNS).write_file([LossRecord(1, 0.1, 2.0)], str(path))
        assert path.read_text().splitlines() == ["iteration,lr,loss", "1,0.1,2.0"]
