"""Write the Wisconsin diagnostic breast cancer data to CSV.

scikit-learn ships this dataset, so no download is needed::

    python scripts/export_breast_cancer.py data/breast_cancer.csv
"""

import sys
from pathlib import Path

import pandas as pd
from sklearn.datasets import load_breast_cancer


def export(path) -> Path:
    bunch = load_breast_cancer()
    frame = pd.DataFrame(bunch.data, columns=bunch.feature_names)
    # sklearn codes malignant as 0; the manifest names the positive class.
    frame.insert(0, "diagnosis", ["M" if t == 0 else "B" for t in bunch.target])
    frame.insert(0, "id", range(len(frame)))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


if __name__ == "__main__":
    print(export(sys.argv[1] if len(sys.argv) > 1 else "data/breast_cancer.csv"))
