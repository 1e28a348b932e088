"""Run the whole command-line pipeline on a small synthetic dataset.

Writes a raw trajectory CSV in the recorded-dataset format (feet, 10 Hz),
then drives the four commands in order: ingest, sample, train, eval.
Everything lands in ./pipeline_out so the artifacts can be inspected
afterwards. Rerunning the script reproduces every file byte for byte.
"""

import json
import pathlib

from highway_irl import cli
from highway_irl.synthetic import (braking_track, constant_speed_track,
                                   lane_change_track, write_ngsim_csv)


def run(argv):
    print(f"\n$ highway-irl {' '.join(argv)}")
    code = cli.main(argv)
    if code != 0:
        raise SystemExit(f"command failed with exit code {code}")


def main():
    out = pathlib.Path("pipeline_out")
    out.mkdir(exist_ok=True)

    # three vehicles, 10.1 s each: a cruiser, a braker, a lane changer
    tracks = {
        1: constant_speed_track(1, x0=10.0, speed=12.0, n=102, lane=2),
        2: braking_track(2, x0=40.0, speed=12.0, brake=2.0, t_brake=1.0,
                         n=102, lane=2),
        3: lane_change_track(3, x0=5.0, speed=11.0, from_lane=3, to_lane=2,
                             n=102),
    }
    raw = out / "raw.csv"
    write_ngsim_csv(raw, tracks)
    print(f"wrote {raw} ({raw.stat().st_size} bytes, "
          f"{len(tracks)} vehicles)")

    store = out / "store.csv"
    run(["ingest", "--input", str(raw), "--output", str(store)])

    buffers = out / "buffers_v1"
    run(["sample", "--store", str(store), "--output-dir", str(buffers),
         "--vehicle", "1"])

    model = out / "model.json"
    run(["train", "--buffer-dir", str(buffers), "--output", str(model),
         "--report", str(out / "training.csv"), "--epochs", "100"])

    doc = json.loads(model.read_text())
    print("\nlearned weights:")
    for name in doc["feature_names"]:
        frozen = " (frozen)" if doc["frozen"][name] else ""
        print(f"  {name:12s} {doc['theta'][name]:+8.3f}{frozen}")

    eval_dir = out / "eval"
    run(["eval", "--store", str(store), "--output-dir", str(eval_dir),
         "--vehicles", "1,2,3", "--epochs", "100",
         "--baseline", "const_vel", "--baseline", "idm_mobil"])

    summary = json.loads((eval_dir / "eval_summary.json").read_text())
    print("\nmean human likeness on held-out scenes (lower is better):")
    for method, value in sorted(summary["test"].items(), key=lambda kv: kv[1]):
        print(f"  {method:18s} {value:7.3f} m")


if __name__ == "__main__":
    main()
