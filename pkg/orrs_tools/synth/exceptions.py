from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class SynthException(OrrsToolsException):
    exit_code = ExitCodes.CONFIG_ERROR


class FleetSpecException(ValueError, SynthException):
    pass
