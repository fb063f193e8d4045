"""Atomic file writes and JSON encoding with ``inf`` spelled as a string."""
import csv
import io
import json
import math
import os
import tempfile

import numpy as np


def atomic_write_text(path, text):
    """Write ``text`` to a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonable(obj):
    """Recursively convert numpy values to plain Python; infinities become ``"inf"``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj):
    return json.dumps(jsonable(obj), indent=1, sort_keys=True) + "\n"


def write_json(path, obj):
    atomic_write_text(path, dumps(obj))


def write_csv(path, columns, rows):
    """Headered CSV with a fixed column order; rows are dicts or sequences."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        vals = [row.get(c) for c in columns] if isinstance(row, dict) else list(row)
        w.writerow([jsonable(v) for v in vals])
    atomic_write_text(path, buf.getvalue())
