"""Entropic regularization approaching the transportation LP."""
# %%
import numpy as np

from kantorovich.core import Space
from kantorovich.costs import EntropicShift, Linear
from kantorovich.instances import random_measure
from kantorovich.transfers import Transfer, eval_primal, sinkhorn

rng = np.random.default_rng(11)
X, Y = Space.of_size(4), Space.of_size(5)
C = np.round(rng.random((4, 5)), 3)
mu, nu = random_measure(X, rng), random_measure(Y, rng)
lp = eval_primal(Transfer(Linear(C), X, Y), mu, nu).value
print(f"LP value {lp:.6f}")

# %% [markdown]
# Sinkhorn scaling and the generic smooth solver reach the same value.  The
# excess over the LP shrinks with eps and stays below eps * log |Y|.
for eps in (1.0, 0.1, 0.01):
    t = Transfer(EntropicShift(C, eps, np.full(5, 0.2)), X, Y)
    sk = sinkhorn(t, mu, nu).value
    fw = eval_primal(t, mu, nu, cross_check=False).value
    print(f"eps={eps:<5} sinkhorn {sk:.9f}  smooth solver {fw:.9f}  bound {lp + eps * np.log(5):.6f}")
