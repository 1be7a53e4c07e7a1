from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class CliException(OrrsToolsException):
    pass


class ConfigException(ValueError, CliException):
    exit_code = ExitCodes.CONFIG_ERROR

    def __init__(self, key_path, msg, *args, **kwargs):
        self.key_path = key_path
        super(ConfigException, self).__init__("{0}: {1}".format(key_path or "<root>", msg), *args, **kwargs)


class MissingArtifactException(CliException):
    exit_code = ExitCodes.IO_ERROR
