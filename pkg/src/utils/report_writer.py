"""
Report Writer - JSON envelopes and CSV tables
Complex values are written as [re, im] in JSON and as re/im column pairs in CSV
"""

import csv
import io
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import orjson

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Recursively convert complex and numpy values to JSON-native ones"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dumps_report(report: Dict) -> bytes:
    """Deterministic indented JSON bytes, newline-terminated"""
    return orjson.dumps(to_jsonable(report), option=orjson.OPT_INDENT_2 | orjson.OPT_APPEND_NEWLINE)


def expand_complex_columns(rows: Sequence[Dict], columns: Sequence[str]) -> Tuple[List[str], List[List[Any]]]:
    """
    Flatten complex cells into <name>_re / <name>_im pairs

    Args:
        rows: dict rows
        columns: column order

    Returns:
        tuple: (header, flat rows)
    """
    complex_cols = {c for c in columns if any(isinstance(r.get(c), (complex, np.complexfloating)) for r in rows)}
    header: List[str] = []
    for c in columns:
        header.extend([f"{c}_re", f"{c}_im"] if c in complex_cols else [c])

    flat = []
    for row in rows:
        out = []
        for c in columns:
            value = row.get(c, '')
            if c in complex_cols:
                z = complex(value)
                out.extend([repr(z.real), repr(z.imag)])
            elif isinstance(value, (float, np.floating)):
                out.append(repr(float(value)))
            else:
                out.append(value)
        flat.append(out)
    return header, flat


class ReportWriter:
    """Write JSON reports or CSV tables to a file or stdout"""

    def __init__(self, output_path: Optional[str] = None):
        """
        Initialize report writer

        Args:
            output_path: destination file (None = stdout)
        """
        self.output_path = Path(output_path) if output_path else None
        self.bytes_written = 0
        self._buffer = io.BytesIO()

    def __enter__(self) -> 'ReportWriter':
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is None:
            self.close()

    def write_json(self, report: Dict):
        self._buffer.write(dumps_report(report))

    def write_csv(self, rows: Sequence[Dict], columns: Sequence[str]):
        """
        Write a CSV table with LF line endings

        Args:
            rows: dict rows
            columns: column order (complex columns become re/im pairs)
        """
        header, flat = expand_complex_columns(rows, columns)
        text = io.StringIO()
        writer = csv.writer(text, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(flat)
        self._buffer.write(text.getvalue().encode('utf-8'))

    def close(self):
        """Flush the buffered output to its destination"""
        data = self._buffer.getvalue()
        if self.output_path is None:
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            self.output_path.parent.mkdir(parents=True, exist_ok=True)
            self.output_path.write_bytes(data)
            logger.info(f"Report written to {self.output_path}")
        self.bytes_written = len(data)
        self._buffer = io.BytesIO()
