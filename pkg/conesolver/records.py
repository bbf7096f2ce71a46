import fnmatch
import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .models import FlowTrace, RadialSolution, RunEntry, SweepRow, SweepTable
from .utils import b64url_decode, b64url_encode, read_csv, write_csv, write_json

IGNORE_FILE = ".conesolverignore"
RECORD_FILES = {"record.json": "solve", "sweep.json": "sweep", "verify.json": "verify"}
SERVED_EXT = {".csv", ".json", ".txt"}


def run_id_for(rel: str) -> str:
    return b64url_encode(rel)


def rel_for_id(rid: str) -> str:
    return b64url_decode(rid)


# --- writers ---

def write_trace_csv(path: Path, trace: FlowTrace) -> Path:
    return write_csv(path, ["time", "action", "phi_norm", "h1_norm"], trace.samples)


def write_radial_csv(path: Path, rad: RadialSolution) -> Path:
    return write_csv(path, ["r", "u"], rad.rows())


SWEEP_HEADER = ["parameter", "alpha1", "criterion", "second_variation", "status"]


def sweep_rows(table: SweepTable) -> List[list]:
    return [[r.parameter, r.alpha1, r.criterion, r.second_variation, r.status] for r in table.rows]


def write_sweep(out_dir: Path, table: SweepTable, extra: Optional[Dict] = None) -> Path:
    write_csv(out_dir / "sweep.csv", SWEEP_HEADER, sweep_rows(table))
    summary = table.summary()
    summary["rows"] = [dict(zip(SWEEP_HEADER, row)) for row in sweep_rows(table)]
    summary.update(extra or {})
    return write_json(out_dir / "sweep.json", summary)


def read_sweep_rows(path: Path) -> Dict[float, SweepRow]:
    """Rows of an earlier sweep.csv that completed, keyed by parameter (for --resume)."""
    if not path.exists():
        return {}
    out = {}
    for rec in read_csv(path):
        row = SweepRow(parameter=float(rec["parameter"]), alpha1=float(rec["alpha1"]),
                       criterion=float(rec["criterion"]),
                       second_variation=float(rec["second_variation"]), status=rec["status"])
        if row.ok:
            out[row.parameter] = row
    return out


def write_record(out_dir: Path, record: Dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    return write_json(out_dir / "record.json", record)


# --- scanning for the results browser ---

def detect_files(run_dir: Path) -> List[str]:
    items: List[str] = []
    try:
        for p in run_dir.iterdir():
            if p.is_file() and p.suffix.lower() in SERVED_EXT:
                items.append(p.name)
    except PermissionError:
        pass
    return sorted(items, key=lambda n: n.lower())


def load_summary(run_dir: Path) -> Optional[RunEntry]:
    for name, kind in RECORD_FILES.items():
        path = run_dir / name
        if not path.exists():
            continue
        try:
            data = json.loads(path.read_text("utf-8"))
        except (OSError, ValueError):
            data = {"error": f"unreadable {name}"}
        if kind == "solve":
            kind = data.get("kind", "solve")
        return RunEntry(folder=run_dir, rel="", id="", kind=kind, summary=data, files=detect_files(run_dir))
    return None


@dataclass(frozen=True)
class IgnoreRules:
    """Directory rules from the runs root's ignore file.

    One pattern per line, '#' comments, a leading '!' re-includes. A pattern
    hides the directory it names and everything below it, or any path it
    glob-matches. The last matching rule decides.
    """
    rules: Tuple[Tuple[bool, str], ...] = ()

    @classmethod
    def load(cls, root: Path) -> "IgnoreRules":
        path = root / IGNORE_FILE
        if not path.is_file():
            return cls()
        rules = []
        for line in path.read_text(encoding="utf-8", errors="ignore").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            negated = line.startswith("!")
            pattern = line[1:] if negated else line
            pattern = pattern.replace("\\", "/").strip("/")
            if pattern:
                rules.append((negated, pattern))
        return cls(tuple(rules))

    def ignores(self, rel: str) -> bool:
        rel = rel.replace("\\", "/").strip("/")
        hidden = False
        for negated, pattern in self.rules:
            if rel == pattern or rel.startswith(pattern + "/") or fnmatch.fnmatchcase(rel, pattern):
                hidden = not negated
        return hidden


def build_runs(root: Path, max_depth: int = 3) -> List[RunEntry]:
    """Breadth-first search for run directories below root, honoring the ignore file."""
    runs: List[RunEntry] = []
    if not root.exists():
        return runs
    rules = IgnoreRules.load(root)
    q = deque([(root, 0)])
    while q:
        cur, depth = q.popleft()
        if depth > max_depth:
            continue
        if cur != root and rules.ignores(cur.relative_to(root).as_posix()):
            continue
        entry = load_summary(cur)
        if entry is not None:
            entry.rel = cur.relative_to(root).as_posix() or "."
            entry.id = run_id_for(entry.rel)
            runs.append(entry)
        try:
            subdirs = sorted(p for p in cur.iterdir() if p.is_dir())
        except PermissionError:
            continue
        q.extend((d, depth + 1) for d in subdirs)
    runs.sort(key=lambda r: r.rel.lower())
    return runs


def resolve_run_dir(root: Path, rid: str) -> Optional[Path]:
    """The run folder for an id, or None when it escapes root or does not exist."""
    root = Path(root).resolve()
    try:
        folder = (root / rel_for_id(rid)).resolve()
    except (ValueError, UnicodeDecodeError):
        return None
    if not folder.is_relative_to(root) or not folder.is_dir():
        return None
    return folder


def get_run(root: Path, rid: str) -> Optional[RunEntry]:
    folder = resolve_run_dir(root, rid)
    if folder is None:
        return None
    entry = load_summary(folder)
    if entry is None:
        return None
    entry.rel = folder.relative_to(Path(root).resolve()).as_posix() or "."
    entry.id = rid
    return entry
