"""Quantum state tomography toolkit with a dimension-adaptive CNN reconstructor.

Submodules:

* ``qcore``: tensor products, partial trace, PSD square root, fidelity.
* ``sampling``: seeded Ginibre / Haar / Hilbert-Schmidt / Bures ensembles.
* ``tomography``: Pauli-6 measurement simulation and the dataset container.
* ``cholesky``: tau-vector <-> density-matrix bijection.
* ``neuralnet``: from-scratch CNN, Adagrad training, checkpoints.
* ``adapt``: measurement padding and the experiment drivers.
* ``analytics``: closed-form and Monte Carlo fidelity baselines.
* ``cli``: the ``qstkit`` command-line entry point.
"""

from . import adapt, analytics, cholesky, cli, neuralnet, qcore, sampling, tomography

__version__ = "0.1.0"

__all__ = [
    "adapt",
    "analytics",
    "cholesky",
    "cli",
    "neuralnet",
    "qcore",
    "sampling",
    "tomography",
    "__version__",
]
