"""Exception hierarchy shared across the library.

Every error raised by the public API derives from :class:`CotaError` so
callers (and the CLI) can map failures onto exit codes without matching on
message strings.
"""


class CotaError(Exception):
    """Base class for all library errors."""


class ValidationError(CotaError):
    """A model, poset, omega map or config violates a structural invariant."""


class CycleDetected(ValidationError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"graph contains a cycle: {' -> '.join(self.cycle)}")


class UnknownParent(ValidationError):
    def __init__(self, variable, parent):
        self.variable = variable
        self.parent = parent
        super().__init__(f"variable {variable!r} lists unknown parent {parent!r}")


class UnknownVariable(ValidationError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown variable {name!r}")


class ValueOutOfDomain(ValidationError):
    def __init__(self, variable, value):
        self.variable = variable
        self.value = value
        super().__init__(f"value {value!r} not in the domain of variable {variable!r}")


class DomainTooLarge(CotaError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"joint domain has {size} states, exceeding the cap of {cap}")


class PosetTooLarge(CotaError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"intervention set has {size} elements, exceeding the cap of {cap}")


class NotTotal(ValidationError):
    def __init__(self, missing):
        self.missing = missing
        super().__init__(f"omega map has no image for intervention {missing}")


class NotSurjective(ValidationError):
    def __init__(self, uncovered):
        self.uncovered = uncovered
        super().__init__(f"omega map misses abstracted intervention {uncovered}")


class NotOrderPreserving(ValidationError):
    def __init__(self, lo, hi):
        self.witness = (lo, hi)
        super().__init__(
            f"omega map violates order preservation on the pair {lo} <= {hi}"
        )


class NotComparable(CotaError):
    def __init__(self, lo, hi):
        self.pair = (lo, hi)
        super().__init__(f"interventions {lo} and {hi} are not comparable")


class SampleOutOfDomain(CotaError):
    def __init__(self, detail):
        super().__init__(f"sample outside the enumerated domain: {detail}")


class InvalidAlignment(ValidationError):
    def __init__(self, detail):
        super().__init__(f"invalid variable alignment: {detail}")


class ShapeMismatch(CotaError):
    def __init__(self, expected, got):
        super().__init__(f"shape mismatch: expected {expected}, got {got}")


class LengthMismatch(CotaError):
    def __init__(self, len_u, len_v):
        super().__init__(f"vectors have different lengths: {len_u} vs {len_v}")


class EmptyVector(CotaError):
    def __init__(self):
        super().__init__("divergence of empty vectors is undefined")


class DomainMismatch(CotaError):
    def __init__(self, detail):
        super().__init__(f"domain mismatch: {detail}")


class EmptyList(CotaError):
    def __init__(self, what):
        super().__init__(f"empty list of {what}")


class NoConvergence(CotaError):
    """Iterative solver hit its iteration cap before meeting tolerance."""

    def __init__(self, what, iters, residual):
        self.iters = iters
        self.residual = residual
        super().__init__(
            f"{what} did not converge after {iters} iterations (residual {residual:.3e})"
        )


class ZeroMassMarginal(CotaError):
    def __init__(self, side):
        super().__init__(f"{side} marginal has zero total mass")


class SizeExceeded(CotaError):
    def __init__(self, size, cap):
        super().__init__(f"problem size {size} exceeds the exact-solver cap {cap}")


class InsufficientPairs(CotaError):
    def __init__(self, n):
        super().__init__(f"leave-one-pair-out needs at least 2 pairs, got {n}")


class MissingColumn(CotaError):
    def __init__(self, column, where):
        super().__init__(f"column {column!r} missing from {where}")


class EmptyClass(CotaError):
    def __init__(self, label):
        super().__init__(f"no rows for held-out class {label!r}")


class SchemaMismatch(CotaError):
    def __init__(self, detail):
        super().__init__(f"schema mismatch: {detail}")


class EmptyFile(CotaError):
    def __init__(self, path):
        super().__init__(f"file {path} contains no data rows")
