"""Exception hierarchy shared across the package."""


class TryOnError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TryOnError):
    """Array dimensions disagree with what an operation requires."""


class DomainError(TryOnError):
    """A parameter lies outside its legal domain."""


class RangeError(TryOnError):
    """Values violate a range constraint (e.g. non-finite, outside [0, 1])."""


class DecodeError(TryOnError):
    """A file exists but cannot be decoded."""


class UnsupportedFormatError(TryOnError):
    """A file decodes but uses a container feature we refuse (alpha, 16-bit, palette)."""


class SymmetryError(TryOnError):
    """A spectrum fed to the inverse transform was not conjugate-symmetric."""


class DivergenceError(TryOnError):
    """The sampling latent became non-finite mid-run; the message names the step."""


class NumericError(TryOnError):
    """A numerically ill-posed intermediate (e.g. strongly negative eigenvalue)."""


class ManifestError(TryOnError):
    """A dataset manifest violates the record schema.

    ``line`` is the 1-based line number of the offending record, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProtocolError(TryOnError):
    """The remote peer violated the wire protocol framing or schema."""


class TransportError(TryOnError):
    """The connection failed or the stream ended mid-message."""


class ContractError(TryOnError):
    """A structurally valid response disagrees with the request (shape, finiteness)."""


class RemoteError(TryOnError):
    """The denoiser server reported a failure; carries the server's message."""


class RecordFailure(TryOnError):
    """An evaluation run aborted on a record; the message names the record id."""
