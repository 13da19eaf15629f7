"""Replay the stroke automaton over a synthetic ambulance trace and print the summary."""

import argparse
from pathlib import Path

from clinadapt import simulate as sim
from clinadapt.model import Algorithm

DATA = Path(__file__).resolve().parent.parent / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default="rural", choices=("rural", "urban", "flat"))
    ap.add_argument("--minutes", type=float, default=47)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--algorithm", default="compromise", choices=[a.value for a in Algorithm])
    ap.add_argument("--out", help="timeline CSV path")
    args = ap.parse_args()

    run = sim.SimulationRun(
        sim.stroke_automaton(),
        sim.synth_trace(args.profile, args.minutes, args.seed),
        tuple(sim.loads_script((DATA / "stroke_script.json").read_text())),
        Algorithm(args.algorithm),
    )
    rows = sim.replay(run)
    if args.out:
        Path(args.out).write_text(sim.dumps_timeline_csv(rows))
    print(sim.summarize(rows).line())


if __name__ == "__main__":
    main()
