"""
Corpus and bench reports: JSON documents plus pandas/CSV/Parquet export.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import orjson
import pandas as pd

from .exceptions import ReportError
from .types import FilePath, MetricReport

REPORT_VERSION = 1


def _flatten_dataframe(df: "pd.DataFrame") -> "pd.DataFrame":
    """Flatten nested dictionaries in DataFrame columns."""

    flattened_data = []

    for _, row in df.iterrows():
        flattened_row = {}
        for col, value in row.items():
            col_str = str(col)
            if isinstance(value, dict):
                for nested_key, nested_value in value.items():
                    flattened_row[f"{col_str}_{nested_key}"] = nested_value
            else:
                flattened_row[col_str] = value
        flattened_data.append(flattened_row)

    return pd.DataFrame(flattened_data)


def _dump(data: dict[str, Any], file_path: FilePath | None, report_type: str) -> bytes:
    try:
        raw = orjson.dumps(data, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
    except TypeError as e:
        raise ReportError(f"Failed to serialize report: {e}", report_type) from e
    if file_path is not None:
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        Path(file_path).write_bytes(raw)
    return raw


def _load(raw: bytes | str, report_type: str) -> dict[str, Any]:
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ReportError(f"Invalid report JSON: {e}", report_type) from e
    if not isinstance(data, dict) or data.get("version") != REPORT_VERSION:
        raise ReportError(
            f"Expected a version {REPORT_VERSION} report object", report_type
        )
    return data


class _TableExport:
    """CSV/Parquet export on top of a ``to_pandas`` method."""

    def to_pandas(self) -> "pd.DataFrame":
        raise NotImplementedError

    def export_csv(self, file_path: FilePath, **kwargs: Any) -> None:
        """
        Export the report rows to a CSV file.

        Args:
            file_path: Path for the output CSV file
            **kwargs: Additional arguments passed to pandas.to_csv()
        """
        self.to_pandas().to_csv(file_path, index=False, **kwargs)

    def export_parquet(self, file_path: FilePath, **kwargs: Any) -> None:
        """
        Export the report rows to a Parquet file.

        Args:
            file_path: Path for the output Parquet file
            **kwargs: Additional arguments passed to pandas.to_parquet()
        """
        self.to_pandas().to_parquet(file_path, index=False, **kwargs)


@dataclass
class ItemResult:
    """Outcome of inpainting one corpus item."""

    index: int
    stem: str
    metrics: MetricReport | None = None
    evals: dict[str, int] = field(default_factory=dict)
    seconds: float = 0.0
    output: str | None = None
    error: str | None = None
    mean_fill: MetricReport | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "index": self.index,
            "stem": self.stem,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "evals": dict(self.evals),
            "output": self.output,
            "error": self.error,
            "mean_fill": self.mean_fill.to_dict() if self.mean_fill else None,
        }
        if include_timing:
            data["seconds"] = self.seconds
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ItemResult":
        metrics = data.get("metrics")
        naive = data.get("mean_fill")
        return cls(
            index=int(data["index"]),
            stem=str(data["stem"]),
            metrics=MetricReport.from_dict(metrics) if metrics else None,
            evals={k: int(v) for k, v in data.get("evals", {}).items()},
            seconds=float(data.get("seconds", 0.0)),
            output=data.get("output"),
            error=data.get("error"),
            mean_fill=MetricReport.from_dict(naive) if naive else None,
        )


@dataclass
class CorpusReport(_TableExport):
    """
    Per-item results of a corpus run in item-index order, plus their mean.

    ``mean_fill`` is the mean score of filling each missing region with the
    known-region mean, the naive reference for ``mean``.
    """

    items: list[ItemResult] = field(default_factory=list)
    mean: MetricReport | None = None
    mean_fill: MetricReport | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> list[ItemResult]:
        return [item for item in self.items if not item.ok]

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        return {
            "version": REPORT_VERSION,
            "config": self.config,
            "items": [item.to_dict(include_timing) for item in self.items],
            "mean": self.mean.to_dict() if self.mean else None,
            "mean_fill": self.mean_fill.to_dict() if self.mean_fill else None,
        }

    def to_json(
        self, file_path: FilePath | None = None, include_timing: bool = True
    ) -> bytes:
        """Serialize (and optionally write) the report as JSON."""
        return _dump(self.to_dict(include_timing), file_path, "corpus")

    @classmethod
    def from_json(cls, raw: bytes | str) -> "CorpusReport":
        """
        Parse a report produced by ``to_json``.

        Raises:
            ReportError: On invalid JSON or a wrong version
        """
        data = _load(raw, "corpus")
        try:
            mean = data.get("mean")
            naive = data.get("mean_fill")
            return cls(
                items=[ItemResult.from_dict(d) for d in data.get("items", [])],
                mean=MetricReport.from_dict(mean) if mean else None,
                mean_fill=MetricReport.from_dict(naive) if naive else None,
                config=dict(data.get("config", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"Malformed corpus report: {e}", "corpus") from e

    def to_pandas(self) -> "pd.DataFrame":
        """
        One row per item, metrics and evals flattened into columns.

        Raises:
            ReportError: If the DataFrame cannot be built
        """
        if not self.items:
            return pd.DataFrame()
        try:
            return _flatten_dataframe(
                pd.DataFrame([item.to_dict() for item in self.items])
            )
        except Exception as e:
            raise ReportError(f"Failed to create DataFrame: {e}", "corpus") from e


@dataclass
class BenchRow:
    """
    One strategy of a bench or sweep, with ratios against the baseline row.

    ``seconds`` and the eval counts are per corpus item.
    """

    name: str
    ddim: bool
    cfs: bool
    param_count: int
    config: dict[str, Any]
    seconds: float
    coarse_evals: int
    fine_evals: int
    weighted_evals: float
    predicted_weighted: float
    metrics: MetricReport | None = None
    time_ratio: float = 1.0
    eval_ratio: float = 1.0

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "ddim": self.ddim,
            "cfs": self.cfs,
            "param_count": self.param_count,
            "config": dict(self.config),
            "coarse_evals": self.coarse_evals,
            "fine_evals": self.fine_evals,
            "weighted_evals": self.weighted_evals,
            "predicted_weighted": self.predicted_weighted,
            "metrics": self.metrics.to_dict() if self.metrics else None,
            "eval_ratio": self.eval_ratio,
        }
        if include_timing:
            data["seconds"] = self.seconds
            data["time_ratio"] = self.time_ratio
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BenchRow":
        metrics = data.get("metrics")
        return cls(
            name=str(data["name"]),
            ddim=bool(data["ddim"]),
            cfs=bool(data["cfs"]),
            param_count=int(data["param_count"]),
            config=dict(data.get("config", {})),
            seconds=float(data.get("seconds", 0.0)),
            coarse_evals=int(data["coarse_evals"]),
            fine_evals=int(data["fine_evals"]),
            weighted_evals=float(data["weighted_evals"]),
            predicted_weighted=float(data["predicted_weighted"]),
            metrics=MetricReport.from_dict(metrics) if metrics else None,
            time_ratio=float(data.get("time_ratio", 1.0)),
            eval_ratio=float(data["eval_ratio"]),
        )


@dataclass
class BenchReport(_TableExport):
    """
    Rows of a bench or sweep; the first row is the baseline.

    ``mean_fill`` scores mean-value fill on the same corpus.
    """

    rows: list[BenchRow] = field(default_factory=list)
    mean_fill: MetricReport | None = None

    def row(self, name: str) -> BenchRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        return {
            "version": REPORT_VERSION,
            "rows": [row.to_dict(include_timing) for row in self.rows],
            "mean_fill": self.mean_fill.to_dict() if self.mean_fill else None,
        }

    def to_json(
        self, file_path: FilePath | None = None, include_timing: bool = True
    ) -> bytes:
        """Serialize (and optionally write) the report as JSON."""
        return _dump(self.to_dict(include_timing), file_path, "bench")

    @classmethod
    def from_json(cls, raw: bytes | str) -> "BenchReport":
        """
        Raises:
            ReportError: On invalid JSON, a wrong version or missing fields
        """
        data = _load(raw, "bench")
        try:
            naive = data.get("mean_fill")
            return cls(
                rows=[BenchRow.from_dict(d) for d in data.get("rows", [])],
                mean_fill=MetricReport.from_dict(naive) if naive else None,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ReportError(f"Malformed bench report: {e}", "bench") from e

    def to_pandas(self) -> "pd.DataFrame":
        """
        One row per strategy with metrics flattened; configs are omitted.

        Raises:
            ReportError: If the DataFrame cannot be built
        """
        if not self.rows:
            return pd.DataFrame()
        try:
            records = []
            for row in self.rows:
                record = row.to_dict()
                del record["config"]
                records.append(record)
            return _flatten_dataframe(pd.DataFrame(records))
        except Exception as e:
            raise ReportError(f"Failed to create DataFrame: {e}", "bench") from e
