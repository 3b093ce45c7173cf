"""qtrates: quantum transition rates between subspaces.

Conditioned transition probabilities ``P(B,t|A)``, their rates
``k_{A->B}(t)`` through flux operators and flux-flux correlators, speed-limit
bounds, counterdiabatic dynamics and a catalog of solvable models.
"""

__version__ = "0.1.0"
