from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class LearnException(OrrsToolsException):
    exit_code = ExitCodes.TRAINING_ERROR


class TrainingException(LearnException):
    def __init__(self, msg, stage=None, *args, **kwargs):
        self.stage = stage
        self.msg = msg
        super(TrainingException, self).__init__(
            msg if stage is None else "[{0}] {1}".format(stage, msg), *args, **kwargs
        )


class ModelFormatException(LearnException):
    pass


class WidthMismatchException(ValueError, LearnException):
    pass


class GridSearchException(LearnException):
    def __init__(self, msg, score_table=None, *args, **kwargs):
        self.score_table = score_table or []
        super(GridSearchException, self).__init__(msg, *args, **kwargs)
