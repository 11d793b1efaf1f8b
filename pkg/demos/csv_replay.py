"""
Replaying a CSV file as a stream, with checkpoints
==================================================

The command-line tool reads a CSV once, batch by batch, and can save its
state so a later run picks up where the previous one stopped.
"""

import json
import os
import tempfile

import numpy as np

from reer import load_state
from reer.cli import main

rng = np.random.default_rng(0)
work = tempfile.mkdtemp()


def write(name, rows):
    path = os.path.join(work, name)
    with open(path, "w") as fh:
        fh.write("day,y,temp,humidity\n")
        for r in rows:
            fh.write(",".join(map(str, r)) + "\n")
    return path


n = 3000
temp, hum = rng.uniform(size=n), rng.uniform(size=n)
y = 1 + 2 * temp - hum + (1 + 0.5 * temp) * rng.standard_t(5, size=n)
rows = [(i // 250, y[i], temp[i], hum[i]) for i in range(n)]
first, second, test = write("jan.csv", rows[:1500]), write("feb.csv", rows[1500:2500]), write("test.csv", rows[2500:])
cols = ["--response", "y", "--features", "temp,humidity", "--batch-column", "day"]

# first month, checkpoint to disk
main(["stream", "--data", first, "--tau", "0.9", "--state-out", os.path.join(work, "s.json")] + cols)
# second month resumes from the checkpoint and writes a per-batch trace
main(["stream", "--data", second, "--state", os.path.join(work, "s.json"),
      "--state-out", os.path.join(work, "s2.json"), "--trace", os.path.join(work, "trace.csv")] + cols)
print(open(os.path.join(work, "trace.csv")).read())

state = load_state(os.path.join(work, "s2.json"))
print("batches seen:", state.batches_seen, "rows seen:", state.n_seen)
print(json.dumps(json.load(open(os.path.join(work, "s2.json"))))[:120], "...")

# held-out mean expectile prediction error
main(["eval", "--state", os.path.join(work, "s2.json"), "--data", test,
      "--response", "y", "--features", "temp,humidity"])
