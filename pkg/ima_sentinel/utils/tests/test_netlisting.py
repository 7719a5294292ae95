import pytest

from ima_sentinel.utils.delta_cycling import oracle_run
from ima_sentinel.utils.netlisting import cyclic_netlist, random_netlist, run_differential_suite
from ima_sentinel.utils.simulating import CombinationalCycle, ProcessKind, elaborate, run


@pytest.mark.parametrize("seed", range(100))
def test_static_kernel_matches_oracle(seed):
    netlist = random_netlist(seed)
    assert run(netlist, 1000) == oracle_run(netlist, 1000)


@pytest.mark.parametrize("seed", range(20))
def test_cyclic_netlists_are_rejected(seed):
    with pytest.raises(CombinationalCycle):
        elaborate(cyclic_netlist(seed))


@pytest.mark.parametrize("seed", range(50))
def test_random_netlists_respect_size_limits(seed):
    netlist = random_netlist(seed)
    assert 1 <= len(netlist.modules) <= 8
    for module in netlist.modules:
        assert 1 <= len(module.processes) <= 4
        assert sum(p.kind is ProcessKind.TRANSITION for p in module.processes) == 1


def test_random_netlist_is_reproducible():
    assert run(random_netlist(11), 50) == run(random_netlist(11), 50)


def test_differential_suite():
    result = run_differential_suite(cases=10, seed=100, cycles=100, cyclic_cases=5)
    assert result.passed
    assert result.mismatches == []
    assert result.cycles_rejected == result.oracle_diverged == 5
