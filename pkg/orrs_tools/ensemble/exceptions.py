from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class EnsembleException(OrrsToolsException):
    exit_code = ExitCodes.TRAINING_ERROR


class CvPlanException(ValueError, EnsembleException):
    exit_code = ExitCodes.DATA_ERROR


class FoldTrainingException(EnsembleException):
    def __init__(self, fold, learner, msg, pollutant=None, *args, **kwargs):
        self.fold = fold
        self.learner = learner
        self.pollutant = pollutant
        super(FoldTrainingException, self).__init__(
            "{0} failed on fold {1}{2}: {3}".format(
                learner, fold, "" if pollutant is None else " ({0})".format(pollutant), msg
            ),
            *args, **kwargs
        )


class MetricsException(ValueError, EnsembleException):
    exit_code = ExitCodes.DATA_ERROR
