"""sdsolve: a dual-scaling interior-point SDP solver with homogeneous
self-dual embedding, SDPA file I/O, instance generators and a benchmark
harness."""

from ._kernels import HAVE_COMPILED, backend
from .model import CoeffKind, CoeffMatrix, SdpProblem, classify_coefficient
from .sdpa_io import ParseError, parse_sdpa, write_sdpa
from .solver import Params, SolveResult, Status, solve

__version__ = "0.1.0"

__all__ = [
    "CoeffKind",
    "CoeffMatrix",
    "SdpProblem",
    "classify_coefficient",
    "ParseError",
    "parse_sdpa",
    "write_sdpa",
    "Params",
    "SolveResult",
    "Status",
    "solve",
    "HAVE_COMPILED",
    "backend",
]
