"""CSV and JSON emission with provenance headers.

CSV files start with ``#``-prefixed provenance lines followed by a header
row; JSON files hold ``{"provenance": ..., "result": ...}``.  The provenance
carries the resolved config and its sha256, so ``config_hash(prov["config"])``
always reproduces ``prov["config_sha256"]``.

Nothing time-dependent is written in deterministic mode.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import math
import os

import numpy as np

from . import __version__
from ._accel import backend
from .config import RunConfig, config_hash


def provenance(cfg: RunConfig, subcommand):
    d = cfg.as_dict()
    prov = {
        "tool": "thermoform",
        "version": __version__,
        "subcommand": subcommand,
        "backend": backend(),
        "mode": cfg.solver["mode"],
        "seed": cfg.solver["seed"],
        "config_sha256": config_hash(d),
        "config": d,
    }
    if not cfg.deterministic:
        prov["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return prov


def _plain(x):
    """JSON-safe copy: numpy to builtins, complex to ``[re, im]``, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [_plain(float(np.real(x))), _plain(float(np.imag(x)))]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def fmt(x):
    return f"{float(x):.12g}"


def csv_text(prov, columns, rows):
    buf = io.StringIO()
    for key in ("tool", "version", "subcommand", "backend", "mode", "seed", "config_sha256", "converged", "created"):
        if key in prov:
            buf.write(f"# {key}: {prov[key]}\n")
    buf.write("# config: " + json.dumps(prov["config"], sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def json_text(prov, result):
    return json.dumps({"provenance": _plain(prov), "result": _plain(result)}, sort_keys=True, indent=2) + "\n"


def read_provenance(path):
    """Provenance dict of an emitted CSV or JSON file."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return json.loads(text)["provenance"]
    prov = {}
    for line in text.splitlines():
        if not line.startswith("# "):
            break
        key, _, val = line[2:].partition(": ")
        prov[key] = json.loads(val) if key == "config" else val
    return prov


def write_artifact(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
