"""One-time generator for metrics_reference.json.

Freezes scikit-learn's AMI/NMI/ARI values (computed here with scikit-learn
1.7.2) for a batch of random label pairs plus known degenerate cases, so the
test suite can pin our in-package implementations against an independent
reference without a scikit-learn dependency at test time.

Run from the repository root:

    python3 tests/fixtures/make_metrics_reference.py
"""

import json
from pathlib import Path

import numpy as np
from sklearn.metrics import (
    adjusted_mutual_info_score,
    adjusted_rand_score,
    normalized_mutual_info_score,
)

OUT = Path(__file__).with_name("metrics_reference.json")


def main():
    rng = np.random.default_rng(20240917)
    cases = []

    # 100 random pairs over varied sizes and label alphabets
    for _ in range(100):
        n = int(rng.integers(2, 200))
        ka = int(rng.integers(1, 12))
        kb = int(rng.integers(1, 12))
        a = rng.integers(0, ka, size=n)
        b = rng.integers(0, kb, size=n)
        cases.append((a.tolist(), b.tolist()))

    # degenerate and hand-picked cases
    cases += [
        ([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1]),
        ([0, 0, 1, 1], [0, 0, 1, 1]),          # identical
        ([0, 0, 1, 1], [1, 1, 0, 0]),          # permuted
        ([0, 0, 0, 0], [0, 1, 2, 3]),          # constant vs singletons
        ([0, 0, 0, 0], [0, 0, 0, 0]),          # both constant
        ([0], [0]),                             # single point
        ([0, 1], [0, 1]),
        ([0, 1, 2], [2, 1, 0]),
        ([5, 5, 7, 7, 9], [1, 1, 1, 2, 2]),     # non-contiguous labels
        ([0, 0, 1, 1, 2, 2, 3, 3], [0, 1, 0, 1, 2, 3, 2, 3]),
    ]

    records = []
    for a, b in cases:
        records.append(
            {
                "a": a,
                "b": b,
                "ami": float(adjusted_mutual_info_score(a, b)),
                "nmi": float(normalized_mutual_info_score(a, b)),
                "ari": float(adjusted_rand_score(a, b)),
            }
        )
    OUT.write_text(json.dumps({"sklearn_version": "1.7.2", "cases": records}))
    print(f"wrote {len(records)} cases to {OUT}")


if __name__ == "__main__":
    main()
