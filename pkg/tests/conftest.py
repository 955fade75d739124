import pytest

from iirsim import harness
from iirsim.bag import lag_to_bag, prior_propagate
from iirsim.datalog import build_lag, load_rules, parse_program, solve
from iirsim.netmodel import load_topology, to_datalog_text

TESTBED = harness.data_root() / "scenarios" / "paper-testbed.json"


def build_testbed(path=TESTBED, include_inert=False):
    model = load_topology(path, include_inert=include_inert)
    graph = solve(parse_program(to_datalog_text(model)).extend(load_rules()))
    lag = build_lag(graph, model.goals)
    bag = lag_to_bag(lag, model.vuln_probs())
    return model, graph, lag, bag, prior_propagate(bag)


@pytest.fixture(scope="session")
def testbed():
    return build_testbed()


@pytest.fixture(scope="session")
def lab_keys():
    root = harness.data_root() / "keys"
    return (root / "emotet-lab-public.pem").read_bytes(), (root / "emotet-lab-private.pem").read_bytes()
