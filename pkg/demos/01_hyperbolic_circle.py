# %% [markdown]
# # Curvature flow of a circle in the hyperbolic plane
#
# In the upper half-plane with ``g = 1 / y^2`` a Euclidean circle stays a
# circle under curvature flow.  Its centre height ``a`` and radius ``r`` have a
# closed form, so the discrete flow can be compared node by node.

# %%
import math

from confcurves.curvemesh import initial_circle
from confcurves.flows import SchemeKind, StepParams, run_evolution
from confcurves.harness import CircleErrorTracker, circle_oracle
from confcurves.metric import MuFamily
from confcurves.oracle import hyperbolic_cf_circle, hyperbolic_cf_extinction

m = MuFamily(1.0)
a0, r0, T = 2.0, 1.0, 0.1
print(f"extinction time {hyperbolic_cf_extinction(a0, r0):.5f}")
print("exact (a, r) at T:", hyperbolic_cf_circle(a0, r0, T))

# %% [markdown]
# Error of the scheme with the mass-lumped normal velocity.  The time step
# scales with ``h^2`` so the observed order should approach two.

# %%
prev = None
for J in (16, 32, 64):
    c0 = initial_circle(a0, r0, J)
    h = float(c0.lengths.max())
    tracker = CircleErrorTracker(circle_oracle("hyperbolic_cf", a0, r0, T))
    run_evolution(SchemeKind.CF_A, m, c0, StepParams(0.1 * h * h), T, [tracker], keep_reports=False)
    rate = "" if prev is None else f"  EOC {math.log(prev[1] / tracker.error) / math.log(prev[0] / h):.2f}"
    print(f"J={J:3d}  h={h:.4f}  error={tracker.error:.3e}{rate}")
    prev = (h, tracker.error)
