from collections import namedtuple


ExitCode = namedtuple('ExitCode', ('value', 'name', 'meaning'))


class ExitCodes(object):
    SUCCESS = ExitCode(0, "SUCCESS", "Completed successfully.")
    FAILURE = ExitCode(1, "FAILURE", "Unexpected failure.")
    CONFIG_ERROR = ExitCode(2, "CONFIG_ERROR", "Invalid configuration.")
    DATA_ERROR = ExitCode(3, "DATA_ERROR", "Invalid or insufficient input data.")
    TRAINING_ERROR = ExitCode(4, "TRAINING_ERROR", "Model training failed.")
    IO_ERROR = ExitCode(5, "IO_ERROR", "Input/output failure.")

    _ALL_EXIT_CODES = [
        SUCCESS, FAILURE, CONFIG_ERROR, DATA_ERROR, TRAINING_ERROR, IO_ERROR
    ]

    EXIT_CODE_MAP = {
        ec.value: ec for ec in _ALL_EXIT_CODES
    }


class OrrsToolsException(Exception):
    exit_code = ExitCodes.FAILURE
