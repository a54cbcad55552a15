"""Single-file archives of named numeric arrays plus a JSON manifest.

The on-disk format is a plain zip: ``manifest.json`` at the root and one
``arrays/<name>.npy`` entry per array. Array names may contain ``/``. Writes
are atomic (temp file then rename).
"""

import io
import json
import os
import zipfile
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .errors import InputError

MANIFEST_NAME = "manifest.json"
ARRAY_PREFIX = "arrays/"


def save_archive(path, arrays: Dict[str, np.ndarray], manifest: dict) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        zf.writestr(MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True))
        for name, arr in arrays.items():
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arr),
                                      allow_pickle=False)
            zf.writestr(ARRAY_PREFIX + name + ".npy", buf.getvalue())
    os.replace(tmp, path)


def load_archive(path) -> Tuple[Dict[str, np.ndarray], dict]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"archive not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            names = zf.namelist()
            if MANIFEST_NAME not in names:
                raise InputError(f"{path}: missing {MANIFEST_NAME}")
            manifest = json.loads(zf.read(MANIFEST_NAME))
            arrays = {}
            for entry in names:
                if entry.startswith(ARRAY_PREFIX) and entry.endswith(".npy"):
                    key = entry[len(ARRAY_PREFIX):-len(".npy")]
                    arrays[key] = np.lib.format.read_array(
                        io.BytesIO(zf.read(entry)), allow_pickle=False
                    )
    except (zipfile.BadZipFile, ValueError, KeyError) as exc:
        raise InputError(f"corrupt archive {path}: {exc}") from exc
    return arrays, manifest
