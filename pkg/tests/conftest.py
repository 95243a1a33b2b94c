import json
from pathlib import Path

import numpy as np
import pytest

GOLDENS = json.loads((Path(__file__).parent / "goldens.json").read_text())


@pytest.fixture(scope="session")
def block_images():
    """10 orthogonal images: disjoint bright blocks over a dark background."""
    images = []
    for p in range(10):
        vec = np.zeros(2048)
        vec[p * 204 : (p + 1) * 204] = 1.0
        images.append(vec)
    return images
