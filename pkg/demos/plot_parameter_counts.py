"""
How the parameter count grows with p
====================================

Sharing the loadings across components leaves the count linear in p with
slope ``q + 1``. The parsimonious skew-t factor family keeps a separate
location and skew vector per component, so even its most constrained
member grows like ``2 G p``.
"""

from mcstfa import PARSIMONY_PANELS, count_free_parameters, parsimony_table

models = ("UUU", "CUU", "CCC", "MCStFA")

###############################################################################
# One panel as a table
# --------------------

q, G = 2, 3
print(f"q={q}, G={G}")
print("   p " + "".join(f"{m:>9}" for m in models))
for p in (10, 50, 100, 200):
    print(f"{p:4d} " + "".join(f"{count_free_parameters(m, p, q, G):9d}" for m in models))

###############################################################################
# Ratio at p = 500 for every panel
# --------------------------------

for q, G in PARSIMONY_PANELS:
    ccc = count_free_parameters("CCC", 500, q, G)
    ours = count_free_parameters("MCStFA", 500, q, G)
    print(f"q={q} G={G}:  CCC/MCStFA = {ccc / ours:.2f}")

###############################################################################
# Rows ready for plotting
# -----------------------
# ``mcstfa params-table`` writes the same rows to CSV.

rows = parsimony_table(range(10, 201, 10), 2, 3, models)
print(len(rows), "rows, first:", rows[0])
