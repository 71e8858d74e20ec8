"""Command line interface: ``consbug run|presets|compare``."""

import argparse
import sys

from .integrators import PRESETS, SimulationDiverged
from .report import GridMismatch, compare_to_reference
from .scenarios import load_config, output_dir, run_scenario


def list_presets():
    """Text table of the integrator presets."""
    header = f"{'preset':<22}{'variant':<16}{'kl':<8}{'s':<10}{'conservative':<14}extra_aug"
    lines = [header, "-" * len(header)]
    for name, c in PRESETS.items():
        lines.append(
            f"{name:<22}{c.variant:<16}{c.kl_tableau:<8}{c.s_tableau:<10}"
            f"{str(c.conservative).lower():<14}{str(c.extra_augmentation).lower()}"
        )
    return "\n".join(lines)


def _parser():
    p = argparse.ArgumentParser(prog="consbug", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario config and write CSV files")
    r.add_argument("config")
    r.add_argument("--out-dir")
    r.add_argument("--t-end", type=float)
    r.add_argument("--theta-bar", type=float)
    r.add_argument("--preset", choices=tuple(PRESETS))
    r.add_argument("--seed", type=int, help="accepted for compatibility; runs are deterministic")
    r.add_argument("--reference", action="store_true", help="dense full-rank RK4 run instead")

    sub.add_parser("presets", help="list integrator presets")

    c = sub.add_parser("compare", help="errors of a run CSV against a reference CSV")
    c.add_argument("run_csv")
    c.add_argument("reference_csv")
    c.add_argument("--interpolate", action="store_true")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "presets":
        print(list_presets())
        return 0
    if args.command == "compare":
        try:
            res = compare_to_reference(args.run_csv, args.reference_csv, args.interpolate)
        except (GridMismatch, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for key, val in res.items():
            if key.endswith("trace"):
                continue
            print(f"{key}: {val:.6e}")
        return 0

    try:
        cfg = load_config(args.config)
        for key in ("t_end", "theta_bar", "preset"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        out = output_dir(args.out_dir, cfg)
        diag, final, records = run_scenario(cfg, out, reference=args.reference)
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    last = records[-1]
    drifts = ", ".join(f"{d:.3e}" for d in last.drift)
    print(f"{len(records) - 1} steps, final rank {last.rank}, relative drift {drifts}")
    print(diag)
    print(final)
    return 0


if __name__ == "__main__":
    sys.exit(main())
