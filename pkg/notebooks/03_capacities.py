"""Choquet integrals, the Dellacherie envelope, and what submodularity buys."""
# %%
import numpy as np

from kantorovich.capacities import (
    SetFunction,
    capacity_theorem_check,
    choquet_integral,
    dellacherie_envelope,
)
from kantorovich.core import Space

S = Space.of_size(4)

# %% [markdown]
# A concave function of cardinality is submodular, so the largest linear
# functional it dominates agrees with its Choquet integral everywhere.
sqrt_card = SetFunction.of_cardinality(S, lambda k: np.sqrt(k / 4))
f = np.array([0.3, 1.2, 0.0, 2.5])
print("choquet", choquet_integral(sqrt_card, f), "exact", choquet_integral(sqrt_card, f, exact=True))
print("dellacherie", dellacherie_envelope(sqrt_card, f))

# %% [markdown]
# A convex function of cardinality breaks submodularity.  The check returns
# a pair of functions on which the Choquet extension is not subadditive.
convex_card = SetFunction.of_cardinality(S, lambda k: 0.25 * k + 0.5 * (k / 4) ** 2)
report = capacity_theorem_check(convex_card)
print("strongly subadditive:", report.strongly_subadditive)
print("witness:", report.subadditivity_witness)
