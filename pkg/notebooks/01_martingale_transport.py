"""Martingale transport on a line: primal, dual, and what an infinite value looks like."""
# %%
import numpy as np

from kantorovich.core import Space, make_measure
from kantorovich.costs import Dilation, Linear, SumCost
from kantorovich.transfers import Transfer, eval_dual, eval_primal, strassen_decompose

# %% [markdown]
# One point at the origin spreads to -1 and +1.  The cost is the distance
# travelled plus a hard constraint that each row of the kernel keeps its mean.
X, Y = Space.grid([0.0]), Space.grid([-1.0, 1.0])
cost = SumCost((Linear(np.abs(X.coords - Y.coords.T)), Dilation.barycentric(X.coords, Y.coords)))
t = Transfer(cost, X, Y)
mu = make_measure(X, [1.0])
nu = make_measure(Y, [0.5, 0.5])

primal = eval_primal(t, mu, nu)
dual = eval_dual(t, mu, nu)
print("primal", primal.value, "dual", dual.value)
print("kernel row", strassen_decompose(t, mu, nu, result=primal).matrix[0])

# %% [markdown]
# Moving the target mean off zero leaves no admissible kernel.  The dual
# then reports +inf together with a direction along which it grows.
skewed = make_measure(Y, [0.25, 0.75])
res = eval_dual(t, mu, skewed)
print("value", res.value, "direction", res.potential.values)
