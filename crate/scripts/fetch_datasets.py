#!/usr/bin/env python3
"""Rebuild the benchmark fixtures in crates/core/tests/data.

Sources come from the `rdatasets` wheel (pip install rdatasets==0.2.10):
  iris.csv           datasets/iris
  breast_cancer.csv  MASS/biopsy (original Wisconsin, 699 rows, ID column dropped)
  pima.csv           MASS/Pima.tr2 + MASS/Pima.te (632 rows, no insulin column)

Missing values are written as "?".  Pass --check to compare against the
committed files instead of overwriting them.
"""

import argparse
import io
import sys
from pathlib import Path

import rdatasets

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "tests" / "data"


def iris():
    df = rdatasets.data("datasets", "iris").drop(columns=["rownames"])
    df.columns = ["sepal_length", "sepal_width", "petal_length", "petal_width", "class"]
    return df


def breast_cancer():
    df = rdatasets.data("MASS", "biopsy").drop(columns=["rownames", "ID"])
    df.columns = [
        "clump_thickness",
        "cell_size_uniformity",
        "cell_shape_uniformity",
        "marginal_adhesion",
        "single_epithelial_cell_size",
        "bare_nuclei",
        "bland_chromatin",
        "normal_nucleoli",
        "mitoses",
        "class",
    ]
    return df


def pima():
    import pandas as pd

    parts = [rdatasets.data("MASS", item) for item in ("Pima.tr2", "Pima.te")]
    df = pd.concat(parts, ignore_index=True).drop(columns=["rownames"])
    df.columns = ["pregnancies", "glucose", "blood_pressure", "skin_thickness", "bmi", "pedigree", "age", "class"]
    return df


def render(df, float_format=None):
    buf = io.StringIO()
    # integer-valued columns with NaN come back as floats; print them as ints
    for col in df.columns:
        s = df[col]
        if s.dtype.kind == "f" and (s.dropna() % 1 == 0).all():
            df[col] = s.astype("Int64")
    df.to_csv(buf, index=False, na_rep="?", float_format=float_format, lineterminator="\n")
    return buf.getvalue()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    args = ap.parse_args()
    bad = 0
    # iris keeps R's one-decimal style, pima prints whole numbers without ".0"
    jobs = [("iris.csv", iris, None), ("breast_cancer.csv", breast_cancer, None), ("pima.csv", pima, "%.15g")]
    for name, build, fmt in jobs:
        text = render(build(), fmt)
        path = OUT / name
        if args.check:
            same = path.read_text() == text
            print(f"{name}: {'matches' if same else 'differs'}")
            bad += not same
        else:
            path.write_text(text)
            print(f"wrote {path}")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
