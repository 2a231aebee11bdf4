"""Exception hierarchy shared across the covcert services."""


class CovcertError(Exception):
    """Base class for all covcert failures."""


# crypto
class InvalidSeed(CovcertError):
    pass


class EmptyDocument(CovcertError):
    pass


# credential
class DuplicateClaim(CovcertError):
    pass


class SelfIssuance(CovcertError):
    pass


class SignatureOrder(CovcertError):
    pass


class WrongSigner(CovcertError):
    pass


class UnknownClaim(CovcertError):
    pass


class MissingClaim(CovcertError):
    pass


# ledger
class DuplicateAnchor(CovcertError):
    pass


class NotScheduled(CovcertError):
    pass


class NotFound(CovcertError):
    pass


class Pending(CovcertError):
    pass


# pod
class PodExists(CovcertError):
    pass


class Forbidden(CovcertError):
    pass


class PermanentResource(Forbidden):
    pass


class SyncFailed(CovcertError):
    pass


# qr codec
class PayloadTooLarge(CovcertError):
    pass


class NotOurCode(CovcertError):
    pass


class CorruptPayload(CovcertError):
    pass


class MalformedPayload(CovcertError):
    pass


class PhotoRequired(CovcertError):
    pass


# flows
class RegistryRejected(CovcertError):
    pass


class BadEmailDomain(CovcertError):
    pass


class TokenRejected(CovcertError):
    pass


class EmptyPhoto(CovcertError):
    pass


class IdentityMismatch(CovcertError):
    pass


class IssuerInactive(CovcertError):
    pass


class SampleUnknown(CovcertError):
    pass


class AlreadyComplete(CovcertError):
    pass


# gateway
class BindFailed(CovcertError):
    pass


class BenchAborted(CovcertError):
    pass


class InsufficientData(CovcertError):
    pass
