"""Turn a raw trajectory into canonical samples with online attributes.

Each sample couples one transition (x, u, x') with an attribute record.
Attribute functions see the trajectory only through a guarded window, so
they cannot read the future or reach past their declared horizon.
"""

import numpy as np

from canonform import (
    AttributeRecord,
    CausalityViolation,
    check_attribute_contract,
    standardize_trajectory,
)

rng = np.random.default_rng(0)
states = np.cumsum(rng.normal(size=(9, 2)), axis=0)
actions = rng.normal(size=(8, 1))

print("Raw trajectory: 9 states, 8 actions")


def displacement_attribute(transition, window):
    # distance travelled since the window start: reads only the past
    first = window[window.earliest]
    d = float(np.linalg.norm(transition.x - first.transition.x))
    return AttributeRecord(custom={"displacement": d})


samples = standardize_trajectory(states, actions, displacement_attribute, horizon=3)
print(f"Canonical samples: {len(samples)}")
for s in samples[:4]:
    print(f"  step {s.index}: displacement={s.attribute.custom['displacement']:.3f}")

report = check_attribute_contract(
    displacement_attribute, [(states, actions)], horizon=3
)
print(
    f"Contract audit: causal={report.causal} local={report.local} "
    f"max_lookback={report.max_lookback}"
)


def cheating_attribute(transition, window):
    window[window.current_index + 1]  # peeks one step ahead
    return AttributeRecord()


try:
    standardize_trajectory(states, actions, cheating_attribute)
except CausalityViolation as exc:
    print(f"Future read rejected as expected: {exc}")
