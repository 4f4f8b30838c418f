"""Process planning over product causalities.

Each step consumes and produces multisets of objects and is guarded by
the components it needs.  The planner breadth-first searches for the
shortest applicable sequence whose result contains the goal; removing a
component from the available set removes every step it guards.
"""

from pathlib import Path

import twinkit as tk
from twinkit.causality import load_model_file
from twinkit.data_model import SignalSchema

steps_file = Path(__file__).resolve().parent.parent / "scenarios" / "demo_steps.model"
loaded = load_model_file(steps_file, SignalSchema([]))
steps = loaded.model.list_product_causalities()
print("steps:")
for s in steps:
    print(f"  {s.name}: {s.p1} => {s.p2} (needs {sorted(s.ok)})")

initial = tk.parse_multiset("raw:1")
goal = tk.parse_multiset("polished_part:1")

found = tk.plan(steps, initial, goal, max_depth=6)
by_id = {s.id: s for s in steps}
print("plan:", " -> ".join(by_id[sid].name for sid in found.steps))

# Replay the plan to show it really reaches the goal.
state = initial
for sid in found.steps:
    state = tk.apply_step(state, by_id[sid])
print("final state:", state, "contains goal:", state.contains(goal))

# Without the polisher no sequence can finish the part.
try:
    tk.plan(steps, initial, goal, available={"saw", "drill_press"}, max_depth=6)
except tk.TwinError as e:
    print("without the polisher:", e)

# Scrap can be recycled back into raw material first.
longer = tk.plan(steps, tk.parse_multiset("scrap:1"), tk.parse_multiset("part:1"), max_depth=6)
print("from scrap:", " -> ".join(by_id[sid].name for sid in longer.steps))
