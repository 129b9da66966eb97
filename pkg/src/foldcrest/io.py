"""File formats: jet JSON, run manifests, result JSON and the comparison-table CSV."""
from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import FoldcrestError
from .systems import Jet3

__all__ = [
    "JetFileError",
    "RunManifest",
    "load_jet",
    "dump_json",
    "table_csv",
    "load_schema",
    "tool_version",
    "TABLE_HEADER",
]

TABLE_HEADER = ("eps", "a_num", "a_asym", "diff")

# accepted spellings besides the Jet3 field names
_ALIASES = {"F_xδ": "F_xdelta", "F_xd": "F_xdelta"}


class JetFileError(FoldcrestError):
    """Unreadable or malformed jet file (exit code 1)."""


def tool_version() -> str:
    try:
        from importlib.metadata import version
        return version("foldcrest")
    except Exception:
        from . import __version__
        return __version__


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: dict = field(default_factory=dict)
    tool_version: str = field(default_factory=tool_version)
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def to_dict(self) -> dict:
        return asdict(self)


def load_jet(path) -> tuple[Jet3, list[str]]:
    """Read a flat JSON jet file.

    Missing fields default to 0; their names are returned and reported in a
    :class:`UserWarning`. Unknown keys are rejected.

    Raises
    ------
    JetFileError
        If the file is missing, is not a JSON object, has unknown keys or
        non-numeric values.
    """
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise JetFileError(f"jet file not found: {p}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise JetFileError(f"cannot read jet file {p}: {exc}") from exc
    if not isinstance(raw, dict):
        raise JetFileError(f"{p}: expected a JSON object of jet entries")
    names = set(Jet3.field_names())
    values = {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name not in names:
            raise JetFileError(f"{p}: unknown jet entry {key!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise JetFileError(f"{p}: entry {key!r} is not a number")
        if not math.isfinite(value):
            raise JetFileError(f"{p}: entry {key!r} is not finite")
        values[name] = float(value)
    missing = [n for n in Jet3.field_names() if n not in values]
    if missing:
        warnings.warn(f"{p}: missing jet entries set to 0: {', '.join(missing)}",
                      UserWarning, stacklevel=2)
    return Jet3(**values), missing


def _clean(obj):
    """Make nested results JSON-safe (complex, tuples, non-finite floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dump_json(obj) -> str:
    """JSON text whose floats round-trip exactly (shortest repr, <= 17 digits)."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _fmt_a(v: float | None) -> str:
    return "" if v is None else f"{v:.14f}"


def _fmt_diff(v: float | None) -> str:
    return "" if v is None else f"{v:.12e}"


def table_csv(rows: Sequence) -> str:
    """Comparison-table layout ``eps,a_num,a_asym,diff``; absent entries are empty."""
    buf = io.StringIO()
    buf.write(",".join(TABLE_HEADER) + "\n")
    for r in rows:
        buf.write(",".join([f"{r.eps:.0e}" if _is_decade(r.eps) else repr(r.eps),
                            _fmt_a(r.a_num), _fmt_a(r.a_asym), _fmt_diff(r.diff)]) + "\n")
    return buf.getvalue()


def _is_decade(x: float) -> bool:
    return x > 0 and float(f"{x:.0e}") == x


def load_schema(name: str) -> dict:
    """JSON schema shipped with the package for command ``name``."""
    text = resources.files("foldcrest").joinpath("schemas", f"{name}.json").read_text()
    return json.loads(text)
