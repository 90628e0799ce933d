"""Exception types shared across the planner."""


class OptiwbError(Exception):
    """Base class for all planner errors."""


class ProblemFormatError(OptiwbError):
    """A problem or plan document failed to parse or validate.

    ``errors`` holds one path-qualified message per defect, e.g.
    ``"scene.sun.elevation: must be in (0, pi/2]"``.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class KinematicsError(OptiwbError):
    """The kinematic chain is unusable for the requested operation."""


class InfeasiblePlanError(OptiwbError):
    """The grid search found no feasible node or edge at some stage.

    ``stage`` is the blocking waypoint index; ``pruned`` maps constraint id
    to the number of candidates it removed at that stage.
    """

    def __init__(self, message, stage, pruned=None):
        super().__init__(message)
        self.stage = stage
        self.pruned = dict(pruned or {})


class SmoothingError(OptiwbError):
    """Smoothing found no feasible trajectory.

    Carries the best-effort trajectory and its violation report so callers
    can inspect what blocked convergence.
    """

    def __init__(self, message, trajectory=None, report=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.report = report
