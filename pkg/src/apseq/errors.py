"""Exception hierarchy shared by all apseq modules.

The CLI maps these onto process exit codes, so solver code should raise
the most specific class that applies instead of bare ValueError.
"""

from __future__ import annotations


class ApseqError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ShapeError(ApseqError):
    """Dimension mismatch between values, operators or seminorm families."""

    exit_code = 2


class RangeError(ApseqError):
    """Evaluation outside the representable range of a sequence backend."""

    exit_code = 2


class InputContractError(ApseqError):
    """A documented precondition on the inputs is violated."""

    exit_code = 2


class ConvergencePreconditionError(ApseqError):
    """The certificate-product summability condition could not be certified."""

    exit_code = 3


class CertificateError(ApseqError):
    """No sound per-seminorm bound certificate could be produced."""

    exit_code = 3


class NumericError(ApseqError):
    """A linear solve or factorization failed or was too ill-conditioned."""

    exit_code = 4
