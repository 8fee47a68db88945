import csv
from dataclasses import dataclass
from typing import IO, Iterable, List, Optional


def format_real(value: Optional[float]) -> str:
    """Shortest text that parses back to the same float64."""
    if value is None:
        return ""
    return repr(float(value))


@dataclass(frozen=True)
class LossRecord:
    iteration: int
    lr: float
    loss: float


@dataclass(frozen=True)
class ErrorRecord:
    sample_id: int
    error: float


@dataclass(frozen=True)
class AuditRecord:
    sample_id: int
    max_residual: Optional[float]
    iterations: Optional[int]
    converged: bool
    message: str = ""


class ColumnGroup:
    def get_headers(self) -> List[str]:
        raise NotImplementedError

    def get_values(self, record) -> List[str]:
        raise NotImplementedError


class Iteration(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["iteration"]

    def get_values(self, record: LossRecord) -> List[str]:
        return [str(record.iteration)]


class LearningRate(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["lr"]

    def get_values(self, record: LossRecord) -> List[str]:
        return [format_real(record.lr)]


class Loss(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["loss"]

    def get_values(self, record: LossRecord) -> List[str]:
        return [format_real(record.loss)]


class SampleId(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["sample_id"]

    def get_values(self, record) -> List[str]:
        return [str(record.sample_id)]


class RelativeError(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["error"]

    def get_values(self, record: ErrorRecord) -> List[str]:
        return [format_real(record.error)]


class SolverStatus(ColumnGroup):
    def get_headers(self) -> List[str]:
        return ["max_residual", "cg_iterations", "converged", "message"]

    def get_values(self, record: AuditRecord) -> List[str]:
        iterations = "" if record.iterations is None else str(record.iterations)
        return [format_real(record.max_residual), iterations, str(record.converged).lower(), record.message]


class ColumnSpec:
    Iteration = Iteration()
    LearningRate = LearningRate()
    Loss = Loss()
    SampleId = SampleId()
    RelativeError = RelativeError()
    SolverStatus = SolverStatus()


LOSS_CURVE_COLUMNS = [ColumnSpec.Iteration, ColumnSpec.LearningRate, ColumnSpec.Loss]
EVAL_COLUMNS = [ColumnSpec.SampleId, ColumnSpec.RelativeError]
AUDIT_COLUMNS = [ColumnSpec.SampleId, ColumnSpec.SolverStatus]


class TableWriter:
    def __init__(self, columns: List[ColumnGroup]):
        self.columns = columns

    def get_headers(self) -> List[str]:
        headers = []
        for column in self.columns:
            headers.extend(column.get_headers())
        return headers

    def generate_row(self, record) -> List[str]:
        row = []
        for column in self.columns:
            row.extend(column.get_values(record))
        return row

    def write(self, records: Iterable, stream: IO[str]) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.get_headers())
        for record in records:
            writer.writerow(self.generate_row(record))

    def write_file(self, records: Iterable, path: str) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            self.write(records, f)
