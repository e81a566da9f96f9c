import hashlib
from pathlib import Path

from ganforge.cli import main


def tree_digest(root) -> str:
    """SHA-256 over every relative path and file body under ``root``."""
    root = Path(root)
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode() + b"\0")
            h.update(p.read_bytes())
    return h.hexdigest()


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {verdict}: {title}" + (f" ({detail})" if detail else ""))
