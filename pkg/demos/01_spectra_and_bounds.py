# %% [markdown]
# # Spectra, resistance and cycle bounds
#
# Three classic topologies on n agents, their algebraic connectivity
# (``alpha``) and total effective resistance (``rho``), and how the
# spanning-tree / cycle bounds bracket them.

# %%
import math

import numpy as np

from consensus_lab import alpha_rho, analyze, kappa, spanning_tree_decomposition, stability_bounds
from consensus_lab.experiments import graph_corpus
from consensus_lab.generators import complete, path, star

n = 12
for name, net in (("path", path(n)), ("complete", complete(n)), ("star", star(n))):
    a, r = alpha_rho(net.coupling_matrix())
    print(f"{name:9s} alpha={a:8.5f} rho={r:8.4f}")

print("closed forms:", 4 * math.sin(math.pi / (2 * n)) ** 2, (n * n - 1) / 6, 1 - 1 / n)

# %% [markdown]
# The path is the slowest to agree and the most sensitive to noise; the
# complete graph is the opposite extreme.  The star has ``alpha = 1`` for
# every n while its resistance grows linearly.

# %%
rep = analyze(complete(6))
print({k: v for k, v in rep.to_json().items() if k != "eigenvalues"})

# %% [markdown]
# ## Tree/cycle bounds on a random corpus
#
# ``alpha >= alpha_tree * lambda_min(I + Q^T Q)`` and the resistance bound
# use the spanning tree plus the cycle incidence matrix ``Q``.

# %%
gaps = []
for name, net in graph_corpus(50, seed=1):
    dec = spanning_tree_decomposition(net)
    a, r = alpha_rho(net.coupling_matrix())
    b = stability_bounds(dec)
    gaps.append((a / b.alpha_lower, b.rho_upper / r, kappa(dec) / (net.n - 1)))
gaps = np.array(gaps)
print("alpha / lower bound   min", gaps[:, 0].min().round(3), "median", np.median(gaps[:, 0]).round(3))
print("rho upper bound / rho min", gaps[:, 1].min().round(3), "median", np.median(gaps[:, 1]).round(3))
print("kappa / (n-1) range", gaps[:, 2].min().round(3), gaps[:, 2].max().round(3))

# %% [markdown]
# On a tree the cycle matrix is empty, so the resistance bound reduces to
# the tree resistance itself.  Using ``n - 1`` there instead would be wrong:

# %%
for m in (5, 6, 10, 20):
    r = alpha_rho(path(m).coupling_matrix())[1]
    print(f"P_{m}: rho = {r:6.2f}  vs  n-1 = {m - 1}")
