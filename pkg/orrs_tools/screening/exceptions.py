from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class ScreeningException(OrrsToolsException):
    exit_code = ExitCodes.DATA_ERROR


class StratumTooSmallException(ScreeningException):
    def __init__(self, pollutant, stratum, needed, available, *args, **kwargs):
        self.pollutant = pollutant
        self.stratum = stratum
        self.needed = needed
        self.available = available
        super(StratumTooSmallException, self).__init__(
            "{0} stratum {1!r} needs {2} records but only {3} are available".format(
                pollutant, stratum, needed, available
            ),
            *args, **kwargs
        )
