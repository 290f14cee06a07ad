# %% [markdown]
# # Geodesics by curve shortening with fixed endpoints
#
# An open polygon between two points relaxes under curvature flow towards the
# geodesic.  In the hyperbolic plane the distance between ``p`` and ``q`` is
# ``arccosh(1 + |p - q|^2 / (2 p_2 q_2))``, which gives an exact target.

# %%
import math

import numpy as np

from confcurves.curvemesh import discrete_length, segment
from confcurves.flows import SchemeKind, StepParams, run_evolution
from confcurves.metric import MuFamily

m = MuFamily(1.0)
p, q = np.array([-2.0, 1.0]), np.array([2.0, 1.0])
exact = math.acosh(1 + np.sum((p - q) ** 2) / (2 * p[1] * q[1]))
c0 = segment(p, q, 32)
print(f"straight segment {discrete_length(m, c0):.4f}, exact distance {exact:.4f}")

# %%
res = run_evolution(SchemeKind.CF_A_open, m, c0, StepParams(1e-3), 5.0, keep_reports=False)
top = res.curve.nodes[:, 1].max()
print(f"relaxed length {discrete_length(m, res.curve):.4f}; apex height {top:.4f} (geodesic arc: {math.sqrt(5):.4f})")
