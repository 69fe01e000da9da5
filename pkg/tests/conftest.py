from __future__ import annotations

import pytest

from abnflow.acts import load_graph
from abnflow.catalog import load_catalog
from abnflow.personas import behavior_params, default_table
from abnflow.pathway import encode_pathway, sample_scenario
from abnflow.pipeline import conversation_seed
from abnflow.realize import realize_conversation

CORPUS_SEED = 7
CORPUS_SIZE = 500


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def graph():
    return load_graph()


@pytest.fixture(scope="session")
def table():
    return default_table()


@pytest.fixture(scope="session")
def sight_tour(catalog):
    return catalog.get("sight_tour")


def make_pathway(seed, catalog, graph, settings=None):
    sc = sample_scenario(catalog, seed, settings=settings)
    return encode_pathway(sc, graph, behavior_params(sc.traveler, sc.agent), catalog, settings)


@pytest.fixture(scope="session")
def pathways(catalog, graph):
    """500 pathways under the pipeline's per-conversation seed split."""
    return [make_pathway(conversation_seed(CORPUS_SEED, i), catalog, graph) for i in range(CORPUS_SIZE)]


@pytest.fixture(scope="session")
def conversations(pathways, catalog):
    return [
        realize_conversation(p, "template", p.scenario.seed, conv_id=f"conv-{i:05d}", catalog=catalog)
        for i, p in enumerate(pathways)
    ]
