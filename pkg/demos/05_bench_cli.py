# # Running experiments from a spec file
#
# The `bench` command takes a JSON spec and writes a report. The same thing
# is available from Python through `clustmiss.bench`.

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from clustmiss.bench import parse_csv, run, validate_spec

spec = {
    "experiment": "ccr-sweep",
    "trials": 5,
    "seed": 42,
    "parameters": {"a_grid": [1, 3], "n_total": 200},
}

# Validation catches bad fields before anything runs.

try:
    validate_spec({"experiment": "ccr-sweep", "trials": 0})
except ValueError as exc:
    print("rejected:", exc)

report = run(spec)
for row in report.summary:
    if row.metric == "ccr_mean":
        print(row.param, row.method, round(row.value, 3))

# The command line writes report.csv (or .json) and a small series.csv
# that is ready for plotting.

with tempfile.TemporaryDirectory() as tmp:
    spec_path = Path(tmp) / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = Path(tmp) / "out"
    cmd = [sys.executable, "-m", "clustmiss.cli", "run", "--spec", str(spec_path), "--out", str(out)]
    print("exit code:", subprocess.run(cmd).returncode)
    text = (out / "report.csv").read_text()
    print(text.splitlines()[0])
    print("same rows as the in-process run:", parse_csv(text) == report)
    print((out / "series.csv").read_text())
