from __future__ import annotations

from pathlib import Path

from flask import Blueprint, abort, current_app, jsonify, render_template_string, send_from_directory

from .records import SERVED_EXT, build_runs, get_run
from .templates import INDEX_HTML, RUN_HTML

bp = Blueprint("conesolver", __name__)


def _cfg():
    c = current_app.config
    return Path(c["RUNS_ROOT"]), c["APP_TITLE"], int(c["MAX_SCAN_DEPTH"])


def _run_or_404(rid: str):
    root, *_ = _cfg()
    run = get_run(root, rid)
    if run is None:
        abort(404)
    return run


@bp.get("/")
def index():
    root, app_title, max_depth = _cfg()
    runs = build_runs(root, max_depth)
    return render_template_string(INDEX_HTML, app_title=app_title, runs=runs, root=root)


@bp.get("/run/<rid>")
def run_detail(rid):
    _, app_title, _ = _cfg()
    run = _run_or_404(rid)
    return render_template_string(RUN_HTML, app_title=app_title, run=run, s=run.summary)


@bp.get("/api/run/<rid>")
def run_api(rid):
    run = _run_or_404(rid)
    return jsonify({"id": run.id, "rel": run.rel, "kind": run.kind, "files": run.files,
                    "record": run.summary})


@bp.get("/file/<rid>/<path:filename>")
def run_file(rid, filename):
    run = _run_or_404(rid)
    folder = run.folder.resolve()
    p = (folder / filename).resolve()
    try:
        p.relative_to(folder)
    except ValueError:
        abort(404)
    if p.suffix.lower() not in SERVED_EXT or not p.is_file():
        abort(404)
    return send_from_directory(folder, p.relative_to(folder).as_posix())


@bp.get("/favicon.ico")
def favicon():
    return ("", 204)
