"""phodge: exact-arithmetic toolkit for p-adic Hodge-theoretic computations."""

from phodge.padic import (
    PadicNumber,
    Fq,
    UnramifiedField,
    qp_arith,
    teichmuller_residue,
    unramified_frobenius,
)
from phodge.witt import WittVector, ghost_map, witt_arith, frobenius_verschiebung

__all__ = [
    "PadicNumber",
    "Fq",
    "UnramifiedField",
    "qp_arith",
    "teichmuller_residue",
    "unramified_frobenius",
    "WittVector",
    "ghost_map",
    "witt_arith",
    "frobenius_verschiebung",
]

__version__ = "0.1.0"
