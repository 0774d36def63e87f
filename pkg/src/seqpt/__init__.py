# This file is part of python-seqpt which is distributed under the
# PYTHON SOFTWARE FOUNDATION LICENSE VERSION 2.

from ._version import __version__
from .channels import ChiMatrix, ChoiMatrix, KrausChannel
from .designs import mub_prime, product_design, sylvester_basis
from .seqpt import fidelity_triple, reconstruct, reconstruct_prime

__all__ = ["__version__", "ChiMatrix", "ChoiMatrix", "KrausChannel",
           "mub_prime", "product_design", "sylvester_basis",
           "fidelity_triple", "reconstruct", "reconstruct_prime"]
