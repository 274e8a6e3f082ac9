#!/usr/bin/env python3
"""Print SHA-256 digests of a fixed reference run's output files.

CI runs this on every platform and compares against
tests/golden/reference_run.sha256; identical digests across OSes pin
cross-platform byte-identity of the whole pipeline. The digests depend on
the NumPy PCG64 stream, so CI pins the NumPy minor series.
"""

import contextlib
import hashlib
import io
import sys
import tempfile
from pathlib import Path

from gridpop.cli import main


def compute() -> str:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        with contextlib.redirect_stdout(io.StringIO()):
            code = main(["run", "--seed", "20240101", "--dt", "monthly",
                         "--t0", "2020", "--tfinal", "2022",
                         "--initial-pop", "2000", "--out", str(out)])
        if code != 0:
            raise SystemExit(code)
        lines = []
        for name in ("statistics.csv", "population.txt"):
            digest = hashlib.sha256((out / name).read_bytes()).hexdigest()
            lines.append(f"{digest}  {name}")
        return "\n".join(lines) + "\n"


if __name__ == "__main__":
    text = compute()
    sys.stdout.write(text)
    if len(sys.argv) > 1 and sys.argv[1] == "--check":
        golden = Path(__file__).resolve().parent.parent / "tests" / "golden" / "reference_run.sha256"
        if text != golden.read_text():
            sys.stderr.write(f"digest mismatch vs {golden}:\n{golden.read_text()}")
            raise SystemExit(1)
        print("digests match the committed golden file")
