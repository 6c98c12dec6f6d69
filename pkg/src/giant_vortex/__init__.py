"""Giant vortex ground states of a fast-rotating condensate in a quadratic-plus-quartic trap.

Modules
-------
params       scaling between physical and reduced parameters, regime tags
grid         radial grids and fields
linear1d     per-mode radial eigenproblems and optimal-mode selection
oscillator   Hermite-basis asymptotic corrections
nonlinear1d  per-mode nonlinear ground states
coupled2d    the multi-mode energy and its minimization
diagnostics  2D reconstruction, winding, hole and zero checks
validation   the acceptance checks
cli          command-line driver
"""

__version__ = "0.1.0"
