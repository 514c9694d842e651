"""Benchmark environments and committed map datasets."""

from importlib import resources

from .gridworld import GridMap, load_map_dataset

DATASETS = ("gridworld_small_mini", "gridworld_large_mini")


def load_dataset(name: str) -> list[GridMap]:
    """Load a committed map dataset by name (see DATASETS)."""
    if name not in DATASETS:
        raise ValueError(f"unknown dataset {name!r}; available: {DATASETS}")
    text = (
        resources.files("paretomcts.envs").joinpath("data").joinpath(f"{name}.txt").read_text()
    )
    return load_map_dataset(text)
