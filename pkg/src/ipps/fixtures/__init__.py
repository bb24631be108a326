"""Bundled instances: the two-job toy and the 24-problem benchmark suite.

The benchmark suite follows the classic 24-problem layout (18 jobs with
alternative routings on 15 machines, combined into problems of 6/9/12/15/18
jobs).  The shipped instances are a calibrated reconstruction, not the
original data; see the README for what is and is not preserved.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..model import InstanceSpec, load_instance

__all__ = ["toy", "kim", "kim_names", "kim_all", "fixture_path"]

_KIM_COUNT = 24


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture (e.g. 'toy.json', 'kim/problem01.json')."""
    root = resources.files(__package__)
    p = Path(str(root.joinpath(name)))
    if not p.exists():
        raise FileNotFoundError(f"no bundled fixture {name!r}")
    return p


def toy() -> InstanceSpec:
    """Two jobs, two machines; optimum 3 with waiting, 4 without."""
    return load_instance(fixture_path("toy.json"))


def kim_names() -> tuple[str, ...]:
    return tuple(f"problem{i:02d}" for i in range(1, _KIM_COUNT + 1))


def kim(problem: int | str) -> InstanceSpec:
    """One benchmark problem, by number (1-24) or name ('problem07')."""
    name = f"problem{problem:02d}" if isinstance(problem, int) else problem
    return load_instance(fixture_path(f"kim/{name}.json"))


def kim_all() -> tuple[InstanceSpec, ...]:
    return tuple(kim(name) for name in kim_names())
