"""Parsing of raw authentication/file/process logs into canonical records.

Three input layouts are supported:

* ``lanl``    -- 9-field comma-separated authentication rows.
* ``cert``    -- CSV rows from logon/device/file activity exports.
* ``generic`` -- one JSON object per line using the LogRecord field names.

All three are projected onto the same :class:`LogRecord`. Unknown category
strings fall back to the ``Unknown`` variant; entity names are kept verbatim
and case-sensitive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, Optional

from .errors import IoError, MalformedRecord

# Closed category vocabularies. Sizes (4, 8, 6, 5) plus the success bit give
# the 24-wide edge feature rows downstream.
INTERACTIONS = ("login", "connection", "access", "creation")
AUTH_TYPES = ("Kerberos", "NTLM", "Negotiate", "MsAuthPkg", "MsV1_0", "LiveSSP", "CredSSP", "Unknown")
LOGON_TYPES = ("Network", "Interactive", "Batch", "Service", "RemoteInteractive", "Unknown")
ORIENTATIONS = ("LogOn", "LogOff", "TGT", "TGS", "Unknown")
OUTCOMES = ("Success", "Failure", "Unknown")

# Raw dataset spellings that map onto a canonical category value.
_AUTH_ALIASES = {
    "MICROSOFT_AUTHENTICATION_PACKAGE_V1_0": "MsAuthPkg",
    "MICROSOFT_AUTHENTICATION_PAC": "MsAuthPkg",
    "MSV1_0": "MsV1_0",
    "NTLMSSP": "NTLM",
}
_LOGON_ALIASES = {
    "NETWORKCLEARTEXT": "Network",
    "REMOTEINTERACTIVE": "RemoteInteractive",
    "CACHEDINTERACTIVE": "Interactive",
}

# Seconds between the CERT dataset epoch (2010-01-01 UTC) and Unix epoch.
_CERT_EPOCH = int(datetime(2010, 1, 1, tzinfo=timezone.utc).timestamp())


@dataclass(frozen=True, slots=True)
class LogRecord:
    """One normalized event: a login, device connection, or object access."""

    t: int
    src_user: str
    dst_user: str
    src_device: str
    dst_device: str
    auth_type: str
    logon_type: str
    orientation: str
    outcome: str
    interaction: str
    object: Optional[str] = None


@dataclass
class ParseReport:
    """Counters for one ingestion pass; parsed + skipped == total lines."""

    parsed: int = 0
    skipped: int = 0

    @property
    def total(self) -> int:
        return self.parsed + self.skipped

    def to_dict(self) -> dict:
        return {"parsed": self.parsed, "skipped_malformed": self.skipped, "total": self.total}


def _canon(value: str, vocab: tuple, aliases: dict | None = None) -> str:
    value = value.strip()
    if aliases:
        value = aliases.get(value.upper(), value)
    for v in vocab:
        if value.lower() == v.lower():
            return v
    return "Unknown"


def _check_invariants(rec: LogRecord) -> LogRecord:
    if rec.t < 0:
        raise MalformedRecord(f"negative timestamp {rec.t}")
    if rec.interaction in ("login", "connection"):
        if not rec.src_device or not rec.dst_device:
            raise MalformedRecord(f"{rec.interaction} record missing a device endpoint")
    else:
        if not rec.object:
            raise MalformedRecord(f"{rec.interaction} record missing an object")
    return rec


def _parse_lanl(line: str) -> LogRecord:
    fields = line.rstrip("\n").split(",")
    if len(fields) != 9:
        raise MalformedRecord(f"expected 9 fields, got {len(fields)}")
    try:
        t = int(fields[0])
    except ValueError:
        raise MalformedRecord(f"non-numeric timestamp {fields[0]!r}") from None
    return _check_invariants(LogRecord(
        t=t,
        src_user=fields[1],
        dst_user=fields[2],
        src_device=fields[3],
        dst_device=fields[4],
        auth_type=_canon(fields[5], AUTH_TYPES, _AUTH_ALIASES),
        logon_type=_canon(fields[6], LOGON_TYPES, _LOGON_ALIASES),
        orientation=_canon(fields[7], ORIENTATIONS),
        outcome=_canon(fields[8], OUTCOMES),
        interaction="login",
    ))


def _cert_timestamp(raw: str) -> int:
    try:
        dt = datetime.strptime(raw.strip(), "%m/%d/%Y %H:%M:%S")
    except ValueError:
        raise MalformedRecord(f"bad CERT timestamp {raw!r}") from None
    return int(dt.replace(tzinfo=timezone.utc).timestamp()) - _CERT_EPOCH


_CERT_LOGON = {"logon": "LogOn", "logoff": "LogOff"}
_CERT_DEVICE = {"connect", "disconnect"}


def _parse_cert(line: str) -> LogRecord:
    # CERT activity rows share a common prefix: id, datetime, user, pc, payload.
    # Logon/device rows carry an activity keyword; file rows carry a filename.
    fields = [f.strip() for f in line.rstrip("\n").split(",")]
    if len(fields) < 5:
        raise MalformedRecord(f"expected >= 5 fields, got {len(fields)}")
    t = _cert_timestamp(fields[1])
    user, pc, payload = fields[2], fields[3], fields[4]
    if not user or not pc:
        raise MalformedRecord("empty user or pc field")
    low = payload.lower()
    if low in _CERT_LOGON:
        return _check_invariants(LogRecord(
            t=t, src_user=user, dst_user=user, src_device=pc, dst_device=pc,
            auth_type="Unknown", logon_type="Interactive",
            orientation=_CERT_LOGON[low], outcome="Success", interaction="login",
        ))
    if low in _CERT_DEVICE:
        return _check_invariants(LogRecord(
            t=t, src_user=user, dst_user=user, src_device=pc, dst_device=pc,
            auth_type="Unknown", logon_type="Unknown",
            orientation="Unknown", outcome="Success", interaction="connection",
        ))
    # Anything else is treated as a file access event with the payload as object.
    return _check_invariants(LogRecord(
        t=t, src_user=user, dst_user=user, src_device=pc, dst_device=pc,
        auth_type="Unknown", logon_type="Unknown",
        orientation="Unknown", outcome="Success", interaction="access",
        object=payload,
    ))


def _parse_generic(line: str) -> LogRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise MalformedRecord("JSON line is not an object")
    t = obj.get("t")
    if not isinstance(t, int) or isinstance(t, bool):
        raise MalformedRecord(f"timestamp must be an integer, got {t!r}")
    interaction = obj.get("interaction", "login")
    if interaction not in INTERACTIONS:
        raise MalformedRecord(f"unknown interaction {interaction!r}")
    rec = LogRecord(
        t=t,
        src_user=str(obj.get("src_user", "")),
        dst_user=str(obj.get("dst_user", "")),
        src_device=str(obj.get("src_device", "")),
        dst_device=str(obj.get("dst_device", "")),
        auth_type=_canon(str(obj.get("auth_type", "Unknown")), AUTH_TYPES, _AUTH_ALIASES),
        logon_type=_canon(str(obj.get("logon_type", "Unknown")), LOGON_TYPES, _LOGON_ALIASES),
        orientation=_canon(str(obj.get("orientation", "Unknown")), ORIENTATIONS),
        outcome=_canon(str(obj.get("outcome", "Unknown")), OUTCOMES),
        interaction=interaction,
        object=obj.get("object") or None,
    )
    return _check_invariants(rec)


_PARSERS = {"lanl": _parse_lanl, "cert": _parse_cert, "generic": _parse_generic}


def parse_record(line: str, format: str = "lanl") -> LogRecord:
    """Parse one raw line of the declared format into a LogRecord.

    Raises MalformedRecord for rows that cannot satisfy the record invariants
    (wrong field count, non-numeric timestamp, missing endpoints).
    """
    try:
        parser = _PARSERS[format]
    except KeyError:
        raise ValueError(f"unknown log format {format!r}") from None
    return parser(line)


def serialize_record(rec: LogRecord) -> str:
    """Write a record as one generic-format JSON line (the round-trip format)."""
    obj = {
        "t": rec.t,
        "src_user": rec.src_user,
        "dst_user": rec.dst_user,
        "src_device": rec.src_device,
        "dst_device": rec.dst_device,
        "auth_type": rec.auth_type,
        "logon_type": rec.logon_type,
        "orientation": rec.orientation,
        "outcome": rec.outcome,
        "interaction": rec.interaction,
    }
    if rec.object is not None:
        obj["object"] = rec.object
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def parse_lines(lines: Iterable[str], format: str = "lanl") -> tuple[list[LogRecord], ParseReport]:
    """Parse an iterable of raw lines, skipping (and counting) malformed rows.

    Every input line is accounted for: parsed + skipped == line count (blank
    lines count as skipped).
    """
    report = ParseReport()
    records = []
    for line in lines:
        if not line.strip():
            report.skipped += 1
            continue
        try:
            records.append(parse_record(line, format))
            report.parsed += 1
        except MalformedRecord:
            report.skipped += 1
    return records, report


def read_records(path: str, format: str = "lanl") -> tuple[list[LogRecord], ParseReport]:
    """Read and parse a whole log file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_lines(fh, format)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None


class LabelSet:
    """Keys of known-malicious events: (t, src_user, src_device, dst_device)."""

    def __init__(self, entries: Iterable[tuple] = ()):
        self.entries = {tuple(e) for e in entries}

    def __contains__(self, key) -> bool:
        return tuple(key) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def key_for(self, rec: LogRecord) -> tuple:
        return (rec.t, rec.src_user, rec.src_device, rec.dst_device)


def load_labels(path: str, format: str = "lanl") -> LabelSet:
    """Load a red-team label file: 4 comma-separated fields per row.

    Rows are (time, user@domain, source computer, destination computer);
    duplicates collapse, malformed rows raise MalformedRecord.
    """
    if format not in ("lanl", "cert"):
        raise ValueError(f"unknown label format {format!r}")
    entries = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                fields = line.rstrip("\n").split(",")
                if len(fields) != 4:
                    raise MalformedRecord(f"expected 4 label fields, got {len(fields)}")
                try:
                    t = int(fields[0])
                except ValueError:
                    raise MalformedRecord(f"non-numeric label timestamp {fields[0]!r}") from None
                entries.add((t, fields[1], fields[2], fields[3]))
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    return LabelSet(entries)


def normalize_stream(records: Iterable[LogRecord]) -> list[LogRecord]:
    """Sort records ascending by time (stable on input order) and drop exact duplicates."""
    ordered = sorted(records, key=lambda r: r.t)
    seen = set()
    out = []
    for rec in ordered:
        if rec in seen:
            continue
        seen.add(rec)
        out.append(rec)
    return out
