import pytest

from phytosub import data_path
from phytosub.corpus import load_corpus, load_recipes, load_substitutions
from phytosub.gateway import Gateway, GatewayConfig, VirtualClock
from phytosub.normalize import cluster_ingredients


@pytest.fixture
def recipes():
    return load_recipes(data_path("recipes.jsonl"))


@pytest.fixture
def corpus():
    return load_corpus(data_path("recipes.jsonl"))


@pytest.fixture
def subs():
    return load_substitutions(data_path("substitutions.jsonl"))


@pytest.fixture
def exemplars():
    return load_substitutions(data_path("exemplars.jsonl"))


@pytest.fixture
def curated_clustering():
    return cluster_ingredients([], data_path("curated_clusters.csv"))


@pytest.fixture
def make_gateway():
    def make(backend, **overrides):
        cfg = GatewayConfig(**{"batch_size": 100, "max_retries": 2, "rps_cap": 50, **overrides})
        return Gateway(backend, cfg, VirtualClock())

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
