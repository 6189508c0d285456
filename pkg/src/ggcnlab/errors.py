"""Exception types shared across the package.

Every error carries enough context (indices, shapes, line numbers) to be
actionable without a debugger.
"""


class GgcnLabError(Exception):
    """Base class for all package errors."""


class SelfLoopError(GgcnLabError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"self-loop at node {node}; graphs are self-loop-free")


class IndexOutOfRangeError(GgcnLabError):
    def __init__(self, node, n):
        self.node = node
        self.n = n
        super().__init__(f"node index {node} out of range for n={n}")


class IsolatedNodeError(GgcnLabError):
    def __init__(self, node):
        self.node = node
        super().__init__(f"node {node} has degree 0; statistic undefined")


class ShapeMismatchError(GgcnLabError):
    def __init__(self, op, shape_a, shape_b):
        self.op = op
        self.shapes = (shape_a, shape_b)
        super().__init__(f"{op}: incompatible shapes {shape_a} and {shape_b}")


class EmptyMaskError(GgcnLabError):
    def __init__(self, what="mask"):
        super().__init__(f"{what} selects no nodes")


class NonScalarLossError(GgcnLabError):
    def __init__(self, shape):
        self.shape = shape
        super().__init__(f"backward requires a 1x1 loss, got shape {shape}")


class NondeterministicError(GgcnLabError):
    def __init__(self):
        super().__init__(
            "function is not deterministic (two evaluations disagree); "
            "disable dropout before gradient checking"
        )


class InvalidDegreeError(GgcnLabError):
    def __init__(self, d):
        self.d = d
        super().__init__(f"degree must be >= 1, got {d}")


class InvalidDiscountError(GgcnLabError):
    def __init__(self, gamma_prev):
        self.gamma_prev = gamma_prev
        super().__init__(f"accumulated factor must be > 0, got {gamma_prev}")


class DimChangeWithResidualError(GgcnLabError):
    def __init__(self, dim_in, dim_out):
        self.dims = (dim_in, dim_out)
        super().__init__(
            f"residual connection needs dim_in == dim_out, got {dim_in} -> {dim_out}"
        )


class ParseError(GgcnLabError):
    def __init__(self, path, line_no, detail):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


class InconsistentCountsError(GgcnLabError):
    def __init__(self, detail):
        super().__init__(f"inconsistent dataset counts: {detail}")


class ClassTooSmallError(GgcnLabError):
    def __init__(self, label, size):
        self.label = label
        self.size = size
        super().__init__(f"class {label} has only {size} nodes; need >= 3 to split")


class InfeasibleSpecError(GgcnLabError):
    pass


class TargetHomophilyUnreachableError(GgcnLabError):
    def __init__(self, target, achieved, tries):
        self.target = target
        self.achieved = achieved
        super().__init__(
            f"could not reach homophily {target:.3f} (best {achieved:.3f}) "
            f"after {tries} rewire attempts"
        )


class DivergedLossError(GgcnLabError):
    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


class InvalidRangeError(GgcnLabError):
    def __init__(self, detail):
        super().__init__(detail)


class IoError(GgcnLabError):
    pass
