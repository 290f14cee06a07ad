# %% [markdown]
# # Elastic flow of hyperbolic circles
#
# For the hyperbolic elastic flow ``sigma = a / r`` obeys a scalar ODE whose
# only steady state is ``sqrt 2``.  Circles with ``sigma`` below it sink and
# shrink; circles above it rise and grow.

# %%
from confcurves.curvemesh import initial_circle
from confcurves.flows import SchemeKind, StepParams, run_evolution
from confcurves.metric import MuFamily
from confcurves.oracle import SQRT2, hyperbolic_elastic_circle

m = MuFamily(1.0)
T = 0.5
for a0 in (1.2, SQRT2, 1.8):
    c0 = initial_circle(a0, 1.0, 64)
    h = float(c0.lengths.max())
    res = run_evolution(SchemeKind.EL_W, m, c0, StepParams(0.1 * h * h), T, keep_reports=False)
    y = res.curve.nodes[:, 1]
    a, r = 0.5 * (y.max() + y.min()), 0.5 * (y.max() - y.min())
    ea, er, _ = hyperbolic_elastic_circle(a0, 1.0, T)
    print(f"a0={a0:.4f}: discrete (a, r)=({a:.4f}, {r:.4f})  exact ({ea:.4f}, {er:.4f})")
