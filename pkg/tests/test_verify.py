import numpy as np

from nfdp import belief, verify
from nfdp.verify import check_belief_recursion, random_instance, run_battery


def test_small_battery_passes():
    tallies, failures = run_battery(3, {"belief_recursion": 15, "noiseless_collapse": 10, "dp_vs_oracle": 3})
    assert tallies == {"belief_recursion": 15, "noiseless_collapse": 10, "dp_vs_oracle": 3}
    assert failures == []


def test_instances_respect_size_limits():
    rng = np.random.default_rng(0)
    for _ in range(30):
        inst = random_instance(rng)
        pol, ch = inst.policy, inst.channels
        assert max(pol.message_count, ch.n_inputs, ch.n_outputs, ch.n_feedback, pol.memory_size) <= 3
        assert pol.horizon <= 3


def test_battery_catches_a_broken_update(monkeypatch):
    real = belief.update_memory_belief

    def skewed(*args, **kw):
        m = real(*args, **kw)
        j = m.joint.copy()
        j[:, 0, 0] += 0.01
        return belief.MemoryBelief(j / j.sum(axis=(1, 2), keepdims=True))

    monkeypatch.setattr(belief, "update_memory_belief", skewed)
    rng = np.random.default_rng(1)
    found = 0
    for _ in range(20):
        inst = random_instance(rng)
        found += check_belief_recursion(inst) is not None
    assert found > 0


def test_failure_record_is_serializable():
    import json

    rng = np.random.default_rng(0)
    f = verify.Failure("x", 1, 2, "detail", random_instance(rng).to_literal())
    assert json.loads(json.dumps(f.to_dict()))["check"] == "x"
