"""Ingredient-substitution pipeline: corpus ETL, LLM filtration and categorization,
fine-tune export, cluster-aware Hit@1 evaluation and phytochemical enrichment."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled example data file (see ``phytosub/data``)."""
    return Path(str(resources.files("phytosub") / "data" / name))
