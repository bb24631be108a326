from __future__ import annotations

import pytest

from ipps import GenConfig, InstanceSpec, generate_instance
from ipps.fixtures import toy as load_toy


@pytest.fixture()
def toy() -> InstanceSpec:
    return load_toy()


# small enough for the exhaustive oracle (<= 8 regular ops, <= 3 machines)
TINY_CONFIG = GenConfig(
    main_ops=(2, 3),
    or_groups=(0, 1),
    branches_per_group=(2, 2),
    branch_ops=(1, 1),
    and_path_prob=0.0,
    machine_prob=0.4,
    time_range=(1, 9),
    max_regular_ops=4,
)


def tiny_instance(seed: int, jobs: int = 2, machines: int = 3) -> InstanceSpec:
    return generate_instance(jobs, machines, TINY_CONFIG, seed=seed)


@pytest.fixture()
def tiny() -> InstanceSpec:
    return tiny_instance(0)
