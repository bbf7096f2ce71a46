import os

# Bind only localhost unless overridden
BIND = os.environ.get("BIND", "127.0.0.1")
PORT = int(os.environ.get("PORT", "5000"))
LOG_LEVEL = os.environ.get("CONESOLVER_LOG", "INFO")
_workers = os.environ.get("CONESOLVER_WORKERS")
WORKERS = int(_workers) if _workers and _workers.isdigit() and int(_workers) > 0 else None


def ensure_root(runs_root: str) -> None:
    if not os.path.isdir(runs_root):
        raise SystemExit(f"runs root does not exist: {runs_root}")


def create_app(runs_root: str):
    from flask import Flask
    from .records import IGNORE_FILE
    from .routes import bp as routes_bp

    app = Flask(__name__)
    app.config["RUNS_ROOT"] = os.path.abspath(runs_root)
    app.config["APP_TITLE"] = "Cone Solver Runs"
    app.config["IGNORE_FILE"] = IGNORE_FILE
    app.config["MAX_SCAN_DEPTH"] = 3

    app.register_blueprint(routes_bp)
    return app
