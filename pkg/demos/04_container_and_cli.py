"""The file-level workflow: containers on disk, driven through the CLI.

Every pipeline stage is a pure file transform, so the whole run is
reproducible byte-for-byte: same model + same flags = same scores.json,
plan.json and pruned blob.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from pfprune import build_fixture, save_model
from pfprune.container import write_blob


def cli(*args):
    cmd = [sys.executable, "-m", "pfprune", *args]
    print("$ pfprune " + " ".join(args))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.stdout:
        print(proc.stdout.rstrip())
    if proc.returncode != 0:
        print("stderr:", proc.stderr.rstrip())
    print()
    return proc


work = Path(tempfile.mkdtemp(prefix="pfprune-demo-"))
save_model(build_fixture("dcase21"), str(work / "model"))
rng = np.random.default_rng(7)
write_blob({f"sample_{i:03d}": rng.standard_normal((1, 40, 500)).astype(np.float32)
            for i in range(4)}, str(work / "samples.pfpw"))
print(f"working directory: {work}\n")

cli("rank", "--model", str(work / "model"), "--method", "operator-norm",
    "--out", str(work / "scores.json"))
cli("plan", "--scores", str(work / "scores.json"), "--ratio", "0.5",
    "--out", str(work / "plan.json"))
cli("apply", "--model", str(work / "model"), "--plan", str(work / "plan.json"),
    "--out-dir", str(work / "pruned"))
cli("cost", "--model", str(work / "pruned"), "--baseline", str(work / "model"),
    "--out", str(work / "cost.json"))
cli("verify", "--model", str(work / "model"), "--pruned", str(work / "pruned"),
    "--plan", str(work / "plan.json"), "--samples", "2")

# active ranking needs data on disk, too
cli("rank", "--model", str(work / "model"), "--method", "hrank",
    "--inputs", str(work / "samples.pfpw"), "--samples", "4",
    "--out", str(work / "scores_hrank.json"))

# and refuses without it
cli("rank", "--model", str(work / "model"), "--method", "hrank",
    "--out", str(work / "nope.json"))

scores = json.loads((work / "scores.json").read_text())
print(f"reports embed provenance: model_hash={scores['model_hash'][:16]}..., "
      f"tool_version={scores['tool_version']}")
