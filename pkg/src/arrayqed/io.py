"""Atomic table writes, run manifests and table read-back."""

import csv
import hashlib
import io
import json
import os
import tempfile
from datetime import datetime, timezone


def fmt(v):
    return format(float(v), ".17g")


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def records_table(rows, keys=None):
    """Headered CSV from a list of dicts; floats at 17 significant digits."""
    keys = keys or list(rows[0])
    out = io.StringIO()
    out.write(",".join(keys) + "\n")
    for row in rows:
        vals = []
        for k in keys:
            v = row[k]
            if isinstance(v, bool) or isinstance(v, str) or isinstance(v, int):
                vals.append(str(v))
            else:
                vals.append(fmt(v))
        out.write(",".join(vals) + "\n")
    return out.getvalue()


def read_table(path_or_text):
    """Rows of a headered CSV as dicts of strings."""
    if "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text) as f:
            text = f.read()
    return list(csv.DictReader(io.StringIO(text)))


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def now():
    return datetime.now(timezone.utc).isoformat()


def write_manifest(outdir, version, config, seed, started, files, physicality):
    """manifest.json with checksums of every emitted file."""
    manifest = {
        "tool": "arrayqed",
        "version": version,
        "seed": seed,
        "started": started,
        "finished": now(),
        "config": config,
        "outputs": {os.path.basename(f): sha256(f) for f in files},
        "physicality": physicality,
    }
    path = os.path.join(outdir, "manifest.json")
    atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
