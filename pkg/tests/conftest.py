import numpy as np
import pytest

from orthoscreen.casegen import SEVERITIES, generate_case, generate_plan
from orthoscreen.pointcloud import synthesize_cloud


@pytest.fixture(scope="session")
def corpus8():
    """Eight deterministic (case, plan, cloud) triples, severities cycling."""
    triples = []
    for i in range(8):
        case = generate_case(1000 + i, case_id=f"case-{i:04d}")
        plan = generate_plan(case, 2000 + i, severity=SEVERITIES[i % 3])
        cloud = synthesize_cloud(case, 3000 + i)
        triples.append((case, plan, cloud))
    return triples


@pytest.fixture(scope="session")
def clouds8(corpus8):
    return [cloud for _, _, cloud in corpus8]


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
