"""Exception hierarchy. Every error carries a stable ``code`` string that is
also what the HTTP service returns in its error bodies."""


class XTomError(Exception):
    """Base class; ``code`` is a stable machine-readable identifier."""

    code = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


def _make(name: str, code: str, base=XTomError):
    return type(name, (base,), {"code": code})


# grammar / parse graph
SchemaError = _make("SchemaError", "SCHEMA_ERROR")
CycleError = _make("CycleError", "CYCLE_ERROR")
DanglingRef = _make("DanglingRef", "DANGLING_REF")
GrammarMismatch = _make("GrammarMismatch", "GRAMMAR_MISMATCH")
MissingDetection = _make("MissingDetection", "MISSING_DETECTION")

# performer
NotTerminal = _make("NotTerminal", "NOT_TERMINAL")
NoChildren = _make("NoChildren", "NO_CHILDREN")
NoParent = _make("NoParent", "NO_PARENT")

# bubble
NonpositiveSigma = _make("NonpositiveSigma", "NONPOSITIVE_SIGMA")
EmptyParseGraph = _make("EmptyParseGraph", "EMPTY_PG")
ZeroContent = _make("ZeroContent", "ZERO_CONTENT")
NotDetected = _make("NotDetected", "NOT_DETECTED")

# belief
EmptyLogs = _make("EmptyLogs", "EMPTY_LOGS")

# policy
NoValidAction = _make("NoValidAction", "NO_VALID_ACTION")
ZeroCost = _make("ZeroCost", "ZERO_COST")
PoolTooSmall = _make("PoolTooSmall", "POOL_TOO_SMALL")
NonfiniteGradient = _make("NonfiniteGradient", "NONFINITE_GRADIENT")

# simulated user
Exhausted = _make("Exhausted", "EXHAUSTED")

# evaluator
NoGames = _make("NoGames", "NO_GAMES")
ConflictingAnswer = _make("ConflictingAnswer", "CONFLICTING_ANSWER")
RangeError = _make("RangeError", "RANGE")

# engine / session
UnknownScene = _make("UnknownScene", "UNKNOWN_SCENE")
UnknownTask = _make("UnknownTask", "UNKNOWN_TASK")
UnknownSession = _make("UnknownSession", "UNKNOWN_SESSION")
WrongPhase = _make("WrongPhase", "WRONG_PHASE")
UnknownQuestion = _make("UnknownQuestion", "UNKNOWN_QUESTION")
TurnLimit = _make("TurnLimit", "TURN_LIMIT")
NoBubblesYet = _make("NoBubblesYet", "NO_BUBBLES_YET")
ConfigError = _make("ConfigError", "CONFIG_ERROR")
CheckpointMismatch = _make("CheckpointMismatch", "CHECKPOINT_MISMATCH")
CheckpointError = _make("CheckpointError", "CHECKPOINT_ERROR")

# cli
EmptyDir = _make("EmptyDir", "EMPTY_DIR")
BindError = _make("BindError", "BIND_ERROR")
