#!/usr/bin/env python3
"""Regenerate the golden CLI outputs under goldens/.

Every golden is the byte-exact stdout of one CLI invocation in JSON
mode.  Symbolic commands only: oracle output embeds platform floats and
is validated structurally in the tests instead.
"""

from __future__ import annotations

import io
import sys
from contextlib import redirect_stdout
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from weylcheck.cli import main  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "goldens"

CASES = {}
for name in ("scalar", "maxwell", "yangmills", "dirac", "scalar-gauged"):
    for mode in ("global", "local"):
        CASES[f"verify-{name}-{mode}.json"] = [
            "verify", f"builtin:{name}", f"--mode={mode}", "--json"]
for field in ("fermion", "gauge", "scalar"):
    CASES[f"decoupling-{field}.json"] = [
        "decoupling", f"--field={field}", "--json"]
CASES["identity-gamma-sigma.json"] = ["identity", "gamma-sigma", "--json"]
CASES["covariantize-scalar.json"] = [
    "covariantize", "builtin:scalar", "--json"]


def run() -> None:
    OUT.mkdir(exist_ok=True)
    for fname, argv in CASES.items():
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = main(argv)
        text = buf.getvalue()
        if code not in (0, 1):
            raise SystemExit(f"{fname}: unexpected exit code {code}")
        (OUT / fname).write_text(text)
        print(f"wrote {fname} ({len(text)} bytes, exit {code})")


if __name__ == "__main__":
    run()
