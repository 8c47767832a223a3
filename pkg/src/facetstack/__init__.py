"""Facet formation in a constrained SOS interface model.

Variational side: lattice-symmetric norms, Wulff shapes and plaquettes,
monolayer-stack energies, and the slope phase diagram with its first-order
transition thresholds.  Microscopic side: height fields on a box, contour
calculus, and Metropolis sampling of the interface weight with a bulk
excess-particle tail.  Geometric metrics compare the two.
"""

__version__ = "0.1.0"
