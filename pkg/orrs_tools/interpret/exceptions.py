from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class InterpretException(OrrsToolsException):
    exit_code = ExitCodes.DATA_ERROR


class ShapleyException(ValueError, InterpretException):
    pass
