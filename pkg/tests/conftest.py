"""Shared fixtures and frozen reference data."""

import numpy as np
import pytest

from toxprop import metrics

# Published two-panel annotation study: 638 articles rated Very Unlikely /
# Unlikely / Neutral / Likely / Very Likely by two disjoint annotator groups.
# Rows are group A, columns group B. Frozen here to pin chance-corrected and
# block-coarsened agreement.
ANNOTATION_LABELS = ("VU", "U", "N", "L", "VL")
ANNOTATION_COUNTS = np.array(
    [
        [89, 28, 0, 23, 1],
        [30, 26, 0, 37, 3],
        [0, 1, 0, 3, 1],
        [31, 25, 0, 34, 56],
        [18, 21, 0, 87, 124],
    ],
    dtype=np.int64,
)


@pytest.fixture(scope="session")
def annotation_matrix() -> metrics.ConfusionMatrix:
    return metrics.ConfusionMatrix(ANNOTATION_LABELS, ANNOTATION_COUNTS)
