"""CSV output and comparison of runs against references."""

import csv
import math

import numpy as np
from scipy.interpolate import RegularGridInterpolator


def _fmt(x):
    return "%.17g" % x


def write_diagnostics(path, records, names):
    header = ["step", "time", "rank"]
    header += list(names) + [f"rel_drift_{n}" for n in names] + ["electric_energy"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in records:
            row = [str(r.step), _fmt(r.time), str(r.rank)]
            row += [_fmt(v) for v in r.invariants] + [_fmt(v) for v in r.drift]
            row.append(_fmt(r.electric_energy))
            wr.writerow(row)


def write_final(path, names, columns):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(names)
        for row in zip(*columns):
            wr.writerow([_fmt(v) for v in row])


def read_csv(path):
    """Header and float columns of a CSV written by this package."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in row] for row in body]).reshape(len(body), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def max_drift(path, name="mass"):
    return float(np.max(read_csv(path)[f"rel_drift_{name}"]))


class GridMismatch(ValueError):
    pass


def _spacing(x):
    u = np.unique(x)
    return float(u[1] - u[0]) if len(u) > 1 else 1.0


def _profile_errors(run, ref, interpolate):
    coords = [c for c in ("x", "y") if c in ref]
    same = all(len(run[c]) == len(ref[c]) and np.allclose(run[c], ref[c]) for c in coords)
    if same:
        target = ref["phi"]
    elif not interpolate:
        raise GridMismatch("grids differ; pass interpolate=True for linear interpolation")
    elif coords == ["x"]:
        target = np.interp(run["x"], ref["x"], ref["phi"])
    else:
        xs, ys = np.unique(ref["x"]), np.unique(ref["y"])
        grid = ref["phi"].reshape(len(xs), len(ys))
        f = RegularGridInterpolator((xs, ys), grid, bounds_error=False, fill_value=None)
        target = f(np.column_stack([run["x"], run["y"]]))
    diff = run["phi"] - target
    vol = math.prod(_spacing(run[c]) for c in coords)
    l2 = float(np.sqrt(vol * np.sum(diff**2)))
    ref_l2 = float(np.sqrt(vol * np.sum(target**2)))
    return {
        "l2_error": l2,
        "max_error": float(np.max(np.abs(diff))),
        "rel_l2_error": l2 / ref_l2 if ref_l2 else l2,
    }


def _energy_errors(run, ref, interpolate):
    if len(run["time"]) == len(ref["time"]) and np.allclose(run["time"], ref["time"]):
        target = ref["electric_energy"]
    elif not interpolate:
        raise GridMismatch("time grids differ; pass interpolate=True for linear interpolation")
    else:
        target = np.interp(run["time"], ref["time"], ref["electric_energy"])
    err = np.maximum.accumulate(np.abs(run["electric_energy"] - target))
    return {"max_electric_energy_error": float(err[-1]), "electric_energy_error_trace": err}


def compare_to_reference(run_csv, reference_csv, interpolate=False):
    """Errors of a run against a reference run.

    Final-profile files (column ``phi``) give L2 and max errors; diagnostics
    files with a finite ``electric_energy`` column give the running maximum
    of the electric-energy error.
    """
    run, ref = read_csv(run_csv), read_csv(reference_csv)
    if "phi" in run and "phi" in ref:
        return _profile_errors(run, ref, interpolate)
    if "electric_energy" in run and "electric_energy" in ref:
        if not np.all(np.isfinite(run["electric_energy"])):
            raise ValueError("run has no electric energy trace")
        return _energy_errors(run, ref, interpolate)
    raise ValueError("files are neither final profiles nor diagnostics of the same kind")
