"""
Run Output
==========

JSON reports, CSV tables and run manifests. Every file is written to a
temporary sibling and moved into place with os.replace, so readers never see
a partial output set.
"""

import csv
import io
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass

import numpy as np

from conducta import __version__
from conducta.errors import ValidationError, Violation
from conducta.inverse import FarFieldMatrix
from conducta.layerpot import FARFIELD_TAG

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str | None
    output_dir: str
    seed: int = 0
    version: str = __version__
    normalization: str = FARFIELD_TAG
    options: dict | None = None

    def to_dict(self):
        return asdict(self)


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def to_json(data):
    return json.dumps(data, indent=2, default=_default)


def write_atomic(path, text):
    """Write text to path via a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    log.debug("wrote %s", path)
    return path


def write_json(path, data):
    return write_atomic(path, to_json(data) + "\n")


def write_csv(path, rows, fieldnames=None):
    """Write a list of dicts as CSV (columns from the first row unless given)."""
    fieldnames = fieldnames or (list(rows[0].keys()) if rows else [])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in row.items()})
    return write_atomic(path, buf.getvalue())


def write_manifest(manifest):
    return write_json(os.path.join(manifest.output_dir, MANIFEST_NAME), manifest.to_dict())


def read_manifest(output_dir):
    with open(os.path.join(output_dir, MANIFEST_NAME)) as fh:
        return RunManifest(**json.load(fh))


# ---------------------------------------------------------------------------
# Far-field matrix files
# ---------------------------------------------------------------------------

def write_farfield_csv(path, matrix):
    """
    Header rows (#normalization, #k, #noise, #theta, #directions), then one
    row per entry: theta_index, d_index, re, im.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["#normalization", matrix.normalization])
    writer.writerow(["#k", repr(float(matrix.k))])
    writer.writerow(["#noise", repr(float(matrix.noise))])
    writer.writerow(["#theta"] + [repr(float(a)) for a in matrix.theta])
    writer.writerow(["#directions"] + [repr(float(a)) for a in matrix.directions])
    writer.writerow(["theta_index", "d_index", "re", "im"])
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            v = matrix.values[i, j]
            writer.writerow([i, j, repr(float(v.real)), repr(float(v.imag))])
    return write_atomic(path, buf.getvalue())


def read_farfield_csv(path):
    header = {}
    entries = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0].startswith("#"):
                header[row[0][1:]] = row[1:]
            elif row[0] != "theta_index":
                entries.append(row)
    missing = [key for key in ("normalization", "k", "theta", "directions") if key not in header]
    if missing:
        raise ValidationError([Violation("far field", f"{path}: missing header rows {missing}")])
    theta = np.array([float(v) for v in header["theta"]])
    directions = np.array([float(v) for v in header["directions"]])
    values = np.zeros((len(theta), len(directions)), dtype=complex)
    for i, j, re, im in entries:
        values[int(i), int(j)] = complex(float(re), float(im))
    return FarFieldMatrix(
        theta=theta, directions=directions, values=values, k=float(header["k"][0]),
        normalization=header["normalization"][0],
        noise=float(header.get("noise", ["0"])[0]),
    )
