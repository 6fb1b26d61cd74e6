"""Rewrite tests/golden/*.json from the current CLI output.

Run after an intentional change to a report; review the diff before committing.
"""
import contextlib
import io
import json
from pathlib import Path

from rquant.cli import main

ROOT = Path(__file__).resolve().parent.parent
GOLDEN = ROOT / "tests" / "golden"


def run(argv):
    argv = list(argv)
    k = argv.index("--manifest") + 1
    argv[k] = str(ROOT / "manifests" / argv[k])
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        code = main(argv + ["--format", "json"])
    return code, out.getvalue()


if __name__ == "__main__":
    cases = json.loads((GOLDEN / "cases.json").read_text())
    for name, argv in cases.items():
        code, text = run(argv)
        if code != 0:
            raise SystemExit(f"{name}: exit code {code}")
        (GOLDEN / f"{name}.json").write_text(text)
        print(f"wrote {name}.json")
