"""Mine a synthetic pore population shaped like the reference dataset and write every output."""
import argparse

from poremine.mining import MiningConfig, mine, report_text, result_files, write_files
from poremine.synth import generate_pore_population


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0, help="population seed")
    ap.add_argument("--mining-seed", type=int, default=1)
    ap.add_argument("--small-artifacts", type=int, default=25)
    ap.add_argument("--elongated-artifacts", type=int, default=5)
    ap.add_argument("--out-dir", default="profiled_out")
    args = ap.parse_args()

    records, _ = generate_pore_population(
        seed=args.seed, artifacts={"small": args.small_artifacts, "elongated": args.elongated_artifacts}
    )
    res = mine(records, MiningConfig(seed=args.mining_seed))
    write_files(args.out_dir, result_files(res))
    print(report_text(res.report), end="")
    print(f"outputs written to {args.out_dir}/")


if __name__ == "__main__":
    main()
