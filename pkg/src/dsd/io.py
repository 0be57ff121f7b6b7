"""Readers and writers for kernels, populations, samples and probability vectors.

Kernel JSON: ``{"n": N, "entries": [[re, im], ...], "meta": {...}}`` with the
``N * N`` entries in row-major order; a plain number stands for ``[re, 0]``.
Unit labels in CSV files are 1-based.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .errors import OutOfRange
from .estimation import Population
from .kernel import Kernel


def kernel_to_dict(K: Kernel, meta=None) -> dict:
    flat = K.entries.reshape(-1)
    entries = [[float(v.real), float(v.imag)] for v in flat]
    d = {"n": K.n_units, "entries": entries}
    if meta:
        d["meta"] = meta
    return d


def kernel_from_dict(d: dict) -> Kernel:
    n = int(d["n"])
    raw = d["entries"]
    if len(raw) != n * n:
        raise OutOfRange(f"expected {n * n} entries, got {len(raw)}")
    vals = np.empty(n * n, dtype=complex)
    for i, e in enumerate(raw):
        if isinstance(e, (int, float)):
            vals[i] = complex(e, 0.0)
        else:
            re, im = e
            vals[i] = complex(re, im)
    return Kernel(vals.reshape(n, n))


def write_kernel(K: Kernel, path, meta=None):
    with open(path, "w") as fh:
        json.dump(kernel_to_dict(K, meta), fh)


def read_kernel(path) -> Kernel:
    with open(path) as fh:
        return kernel_from_dict(json.load(fh))


def read_pi(path, column: str = "pi") -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise OutOfRange(f"{path}: missing column {column!r}")
        return np.array([float(row[column]) for row in reader])


def write_pi(pi, path):
    with open(path, "w", newline="") as fh:
        fh.write("pi\n")
        for p in pi:
            fh.write(f"{float(p)!r}\n")


def read_points(path) -> np.ndarray:
    """Whitespace- or comma-separated coordinates, one point per line; '#' comments."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                rows.append([float(v) for v in line.replace(",", " ").split()])
    return np.array(rows)


def read_population(path) -> Population:
    """CSV with columns ``unit, y, x1..xQ`` and optional ``w`` and ``pi``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        rows = list(reader)
    if "y" not in cols:
        raise OutOfRange(f"{path}: population needs a 'y' column")
    aux_names = [c for c in cols if c.startswith("x") and c[1:].isdigit()]
    aux_names.sort(key=lambda c: int(c[1:]))
    y = np.array([float(r["y"]) for r in rows])
    aux = np.array([[float(r[c]) for r in rows] for c in aux_names]) if aux_names else None
    w = np.array([float(r["w"]) for r in rows]) if "w" in cols else None
    pi = np.array([float(r["pi"]) for r in rows]) if "pi" in cols else None
    return Population(y, aux, w, pi, aux_names=aux_names)


def write_population(pop: Population, path):
    names = list(pop.aux_names)
    cols = ["unit", "y", *names, "w"] + (["pi"] if pop.target_pi is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for k in range(pop.n_units):
            row = [k + 1, repr(float(pop.y[k]))] + [repr(float(pop.aux[q, k])) for q in range(len(names))]
            row.append(repr(float(pop.weights[k])))
            if pop.target_pi is not None:
                row.append(repr(float(pop.target_pi[k])))
            writer.writerow(row)


def write_samples(masks, path):
    """One row per draw: ``draw,units`` with space-separated 1-based units."""
    with open(path, "w", newline="") as fh:
        fh.write("draw,units\n")
        for i, m in enumerate(masks):
            units = " ".join(str(k + 1) for k in np.flatnonzero(m))
            fh.write(f"{i},{units}\n")


def read_samples(path) -> list[tuple]:
    """Samples as tuples of 0-based units, in file order."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            units = row["units"].split()
            out.append(tuple(int(u) - 1 for u in units))
    return out


def write_distribution(dist, path):
    """``mask,probability`` rows; bit ``k`` of ``mask`` is unit ``k + 1``."""
    with open(path, "w", newline="") as fh:
        fh.write("mask,probability\n")
        for subset, p in dist.items():
            mask = sum(1 << k for k in subset)
            fh.write(f"{mask},{p!r}\n")
