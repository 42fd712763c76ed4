"""Exception hierarchy shared by all analysis modules."""


class LtvError(Exception):
    """Base class for every error raised by ltvpass."""


class InputError(LtvError):
    """Malformed or inconsistent user input (maps to CLI exit code 2)."""


class NumericalError(LtvError):
    """A numerical procedure failed (maps to CLI exit code 3)."""


class ExprSyntaxError(InputError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifier(InputError):
    def __init__(self, name, offset):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class SingularityError(NumericalError):
    """Evaluation hit a declared singularity (division by zero, etc.)."""

    def __init__(self, t, node, reason):
        super().__init__(f"{reason} in {node} at t={float(t)!r}")
        self.t = t
        self.node = node
        self.reason = reason


class NonDifferentiablePoint(NumericalError):
    def __init__(self, t):
        super().__init__(f"t={float(t)!r} is an excluded (non-differentiable) point")
        self.t = t


class DimensionMismatch(InputError):
    pass


class DomainError(InputError):
    pass


class NodesNotOnGrid(InputError):
    pass


class ConvergenceFailure(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    def __init__(self, pivot, value=None):
        msg = f"matrix is not positive definite (pivot {pivot}"
        msg += f", value {value!r})" if value is not None else ")"
        super().__init__(msg)
        self.pivot = pivot
        self.value = value


class SingularMatrix(NumericalError):
    def __init__(self, rank, n):
        super().__init__(f"singular matrix: estimated rank {rank} < {n}")
        self.rank = rank
        self.n = n


class IntegrationFailure(NumericalError):
    pass


class DPlusDHNotUniformlyPositive(NumericalError):
    def __init__(self, t, min_eig):
        super().__init__(
            f"D+D^H is not uniformly positive: min eigenvalue {min_eig:.3e} at t={float(t)!r}")
        self.t = t
        self.min_eig = min_eig


class BlowUp(NumericalError):
    def __init__(self, t):
        super().__init__(f"Riccati solution escapes in finite time near t={float(t)!r}")
        self.t = t


class InvariantViolation(NumericalError):
    def __init__(self, invariant, t, residual):
        super().__init__(
            f"invariant {invariant!r} violated at t={float(t)!r} (residual {residual:.3e})")
        self.invariant = invariant
        self.t = t
        self.residual = residual


class NotAKypSolution(NumericalError):
    def __init__(self, t, min_eig):
        super().__init__(f"Q does not satisfy the KYP inequality at t={float(t)!r} "
                         f"(min eigenvalue {min_eig:.3e})")
        self.t = t
        self.min_eig = min_eig


class RankNotConstant(NumericalError):
    def __init__(self, ranks):
        super().__init__(f"rank of Q is not constant on the grid: {sorted(set(ranks))}")
        self.ranks = ranks


class KernelInclusionViolated(NumericalError):
    """A12 != 0 or C2 != 0 after the null space decomposition."""

    def __init__(self, block, t, norm):
        super().__init__(f"{block} is not zero at t={float(t)!r} (norm {norm:.3e}); "
                         "Q is not a storage matrix for this system")
        self.block = block
        self.t = t
        self.norm = norm


class A12NotZero(KernelInclusionViolated):
    def __init__(self, t, norm):
        super().__init__("A12", t, norm)


class C2NotZero(KernelInclusionViolated):
    def __init__(self, t, norm):
        super().__init__("C2", t, norm)


class RankIncreaseDetected(NumericalError):
    def __init__(self, t, before, after):
        super().__init__(f"rank of Q increases from {before} to {after} at t={float(t)!r}")
        self.t = t
        self.before = before
        self.after = after


class EigenvalueCrossingUnresolved(NumericalError):
    def __init__(self, t, detail=""):
        super().__init__(f"eigenvector alignment is ambiguous at t={float(t)!r} {detail}".rstrip())
        self.t = t


class SingularTransform(NumericalError):
    def __init__(self, t, sigma_min):
        super().__init__(f"transformation is singular at t={float(t)!r} "
                         f"(smallest singular value {sigma_min:.3e})")
        self.t = t
        self.sigma_min = sigma_min


class NotOrientationPreserving(NumericalError):
    def __init__(self, t, rate):
        super().__init__(f"time map derivative {rate:.3e} <= 0 at t={float(t)!r}")
        self.t = t
        self.rate = rate


class DomainMismatch(InputError):
    pass


class VolumeNonPositive(InputError):
    def __init__(self, which, t, value):
        super().__init__(f"{which} volume {value:.6g} is not positive at t={float(t)!r}")
        self.which = which
        self.t = t
        self.value = value
