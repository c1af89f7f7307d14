"""
Deterministic CSV / JSON emission and run manifests
"""

import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

from config.constants import FILE_CONSTANTS, FLOAT_FORMAT, TOOL_NAME, TOOL_VERSION

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Floats with 17 significant digits, booleans as true/false, None as empty"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, FLOAT_FORMAT)
    return str(value)


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce one run; wall time lives only here"""

    command: List[str]
    subcommand: str
    parameters: Dict[str, Any]
    seeds: List[int] = field(default_factory=list)
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION
    wall_time_seconds: float = 0.0
    outputs: Dict[str, str] = field(default_factory=dict)
    system: Dict[str, Any] = field(default_factory=dict)
    settings: Dict[str, Any] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)

    def add_output(self, path: Path) -> None:
        self.outputs[str(path)] = sha256_of(path)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, default=str)
        logger.info(f"Manifest written to {path}")


class OutputWriter:
    """Renders result rows under a frozen header"""

    @staticmethod
    def render_csv(header: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(row.get(column)) for column in header])
        return buffer.getvalue()

    @staticmethod
    def render_json(header: Sequence[str], rows: Sequence[Mapping[str, Any]], manifest: Optional[RunManifest] = None) -> str:
        payload = {
            "columns": list(header),
            "rows": [{column: format_value(row.get(column)) for column in header} for row in rows],
        }
        if manifest is not None:
            payload["manifest"] = manifest.to_dict()
        return json.dumps(payload, indent=2, sort_keys=False, default=str)

    @classmethod
    def emit(
        cls,
        header: Sequence[str],
        rows: Sequence[Mapping[str, Any]],
        output: Optional[Path] = None,
        manifest: Optional[RunManifest] = None,
        manifest_path: Optional[Path] = None,
        with_json: bool = False,
    ) -> None:
        """Write CSV to output (or stdout), plus the JSON mirror and the manifest"""
        text = cls.render_csv(header, rows)
        if output is None:
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            output.write_text(text, encoding="utf-8")
            logger.info(f"Wrote {len(rows)} rows to {output}")
            if manifest is not None:
                manifest.add_output(output)
            if with_json:
                json_path = output.with_suffix(FILE_CONSTANTS["JSON_SUFFIX"])
                json_path.write_text(cls.render_json(header, rows, manifest), encoding="utf-8")
                if manifest is not None:
                    manifest.add_output(json_path)
            if manifest_path is None:
                manifest_path = output.with_name(output.name + FILE_CONSTANTS["MANIFEST_SUFFIX"])
        if manifest is not None and manifest_path is not None:
            manifest.write(manifest_path)
