#!/usr/bin/env python3
"""Download the standard SR benchmark HR images (Set5, Set14, BSD100,
Urban100) into data/benchmarks/, the layout the acceptance suite expects:

    data/benchmarks/Set5/*.png
    data/benchmarks/Set14/*.png
    data/benchmarks/BSD100/*.png
    data/benchmarks/Urban100/*.png

Uses the EDSR project's public testing bundle. Needs internet access; if the
host is offline, place the HR images manually in the layout above (any
lossless format) or set SRFEAT_BENCHMARKS to an equivalent directory.
"""

import shutil
import sys
import tarfile
import tempfile
import urllib.request
from pathlib import Path

BUNDLE_URL = "https://cv.snu.ac.kr/research/EDSR/benchmark.tar"
# bundle directory name -> local dataset name
DATASETS = {"Set5": "Set5", "Set14": "Set14", "B100": "BSD100",
            "Urban100": "Urban100"}


def main() -> int:
    out_root = Path(__file__).resolve().parent.parent / "data" / "benchmarks"
    if all((out_root / name).is_dir() for name in DATASETS.values()):
        print(f"benchmarks already present under {out_root}")
        return 0
    out_root.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        bundle = Path(tmp) / "benchmark.tar"
        print(f"downloading {BUNDLE_URL} ...")
        try:
            urllib.request.urlretrieve(BUNDLE_URL, bundle)
        except OSError as exc:
            print(f"download failed: {exc}", file=sys.stderr)
            print("place HR images manually under", out_root, file=sys.stderr)
            return 1
        print("extracting ...")
        with tarfile.open(bundle) as tar:
            tar.extractall(tmp)
        for bundle_name, local_name in DATASETS.items():
            src = Path(tmp) / "benchmark" / bundle_name / "HR"
            dst = out_root / local_name
            dst.mkdir(exist_ok=True)
            count = 0
            for img in sorted(src.glob("*.png")):
                shutil.copy2(img, dst / img.name)
                count += 1
            print(f"{local_name}: {count} HR images")
    print(f"done; acceptance criterion will now run against {out_root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
