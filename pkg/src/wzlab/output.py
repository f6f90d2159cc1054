"""Deterministic CSV and JSON writers.

CSV files start with ``# key=value`` lines carrying the config hash, master
seed and package version, followed by a header row.  Floats are written with
``repr`` so values round-trip exactly and reruns are byte-identical.
"""

import csv
import io
import json
import math
import os
from pathlib import Path

from . import __version__

REGION_HEADER = ("n", "epsilon", "D", "G", "rate_bits", "regime", "delta")
CODEC_HEADER = ("trial_id", "encode_ok", "debin_ok", "cause", "distortion", "gen_error")


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        v = float(v)  # numpy float64 subclasses float but reprs differently
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if hasattr(v, "item"):  # numpy scalar
        return fmt(v.item())
    return str(v)


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path, header, rows, meta):
    lines = [f"# {k}={meta[k]}" for k in sorted(meta)]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    _atomic_write(path, "\n".join(lines) + ("\n" if lines else "") + out.getvalue())


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def write_json(path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")


def write_records(path, header, rows, meta, fmt_name="csv"):
    """Write ``rows`` as CSV, or as JSON records when ``fmt_name == 'json'``."""
    if fmt_name == "json":
        write_json(path, {"meta": meta, "records": [dict(zip(header, r)) for r in rows]})
    else:
        write_csv(path, header, rows, meta)


def read_csv(path):
    """Return ``(meta, header, rows)`` with rows as lists of strings."""
    meta, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                meta[k] = v
            else:
                body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]


def base_meta(config, command):
    return {"config_hash": config.hash, "seed": config.seed, "version": __version__, "command": command}

