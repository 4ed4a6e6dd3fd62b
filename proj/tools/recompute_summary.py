#!/usr/bin/env python3
# Copyright 2026 The ToOT Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Recomputes experiment summaries from the trace CSVs and checks them.

Reads every summary_<key>.json in an output directory of `toot run`, loads
the per-run trace files it covers, recomputes A_f, f, interactions to f and
mean ITB from the accuracy curves, and reports any disagreement.
"""

import argparse
import csv
import json
import math
import pathlib
import sys


def load_trace(path):
    """Returns (u, A) with u[i] for frame i + 1 and A[0..n]."""
    u, acc = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if int(row["frame"]) == 0:
                acc.append(float(row["A"]))
                continue
            u.append(int(row["u"]))
            acc.append(float(row["A"]))
    return u, acc


def first_reaching(acc, a_f):
    for i in range(1, len(acc)):
        if acc[i] >= a_f:
            return i
    return None


def itb_mean(u, acc, m):
    """Mean ITB over interactions of frames 1..m of the truncated trace."""
    frames = [i for i in range(1, m + 1) if u[i - 1] == 1]
    if not frames:
        return None
    total = 0.0
    for j, x in enumerate(frames):
        k = frames[j + 1] if j + 1 < len(frames) else m + 1
        total += acc[k - 1] - acc[x - 1]
    return total / len(frames)


def close(a, b, tol):
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def check(directory, tol):
    directory = pathlib.Path(directory)
    summaries = sorted(directory.glob("summary_*.json"))
    if not summaries:
        print(f"no summaries in {directory}", file=sys.stderr)
        return 1

    loaded = []
    for path in summaries:
        summary = json.loads(path.read_text())
        key = path.stem[len("summary_"):]
        runs = [r["run"] for r in summary["per_run"]]
        traces = {r: load_trace(directory / f"trace_{key}_run{r}.csv") for r in runs}
        loaded.append((key, summary, traces))

    a_f = min(
        sum(max(acc[1:]) for _, acc in traces.values()) / len(traces)
        for _, _, traces in loaded)

    problems = []

    def expect(what, got, want):
        if not close(got, want, tol):
            problems.append(f"{what}: summary has {got}, recomputed {want}")

    for key, summary, traces in loaded:
        expect(f"{key} A_f", summary["A_f"], a_f)
        reached = 0
        inter, itbs = [], []
        for entry in summary["per_run"]:
            u, acc = traces[entry["run"]]
            f = first_reaching(acc, a_f)
            m = f if f is not None else len(u)
            count = sum(u[:m])
            mean = itb_mean(u, acc, m)
            where = f"{key} run {entry['run']}"
            expect(f"{where} a_max", entry["a_max"], max(acc[1:]))
            if entry["f"] != f:
                problems.append(f"{where} f: summary has {entry['f']}, recomputed {f}")
            expect(f"{where} interactions_to_f", entry["interactions_to_f"], count)
            expect(f"{where} mean_itb", entry["mean_itb"], mean)
            reached += f is not None
            inter.append(count)
            if mean is not None:
                itbs.append(mean)
        n = len(summary["per_run"])
        expect(f"{key} a_max", summary["a_max"],
               sum(max(acc[1:]) for _, acc in traces.values()) / n)
        expect(f"{key} interactions_to_f", summary["interactions_to_f"], sum(inter) / n)
        expect(f"{key} mean_itb", summary["mean_itb"], sum(itbs) / len(itbs) if itbs else None)
        if summary["runs"] != n or summary["runs_reached"] != reached:
            problems.append(f"{key} run counts: summary has {summary['runs']}/"
                            f"{summary['runs_reached']}, recomputed {n}/{reached}")
        length = len(next(iter(traces.values()))[1])
        mean_curve = [sum(acc[i] for _, acc in traces.values()) / n for i in range(length)]
        f_mean = first_reaching(mean_curve, a_f - tol)
        if summary["f"] != f_mean:
            problems.append(f"{key} f: summary has {summary['f']}, recomputed {f_mean}")

    for p in problems:
        print(p, file=sys.stderr)
    print(f"{len(loaded)} summaries checked against {directory}: "
          f"{'OK' if not problems else f'{len(problems)} mismatches'}")
    return 1 if problems else 0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("directory", help="output directory of `toot run`")
    parser.add_argument("--tol", type=float, default=1e-9, help="absolute tolerance")
    args = parser.parse_args()
    return check(args.directory, args.tol)


if __name__ == "__main__":
    sys.exit(main())
