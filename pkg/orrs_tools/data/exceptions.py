from orrs_tools.exceptions import OrrsToolsException, ExitCodes


class DataException(OrrsToolsException):
    exit_code = ExitCodes.DATA_ERROR


class InvalidRecordException(ValueError, DataException):
    pass


class DuplicateInspectionException(DataException):
    def __init__(self, offenders, *args, **kwargs):
        self.offenders = list(offenders)
        super(DuplicateInspectionException, self).__init__(
            "Duplicate (vin, inspection_date) pairs: {0}".format(
                ", ".join("({0}, {1})".format(vin, d.isoformat()) for vin, d in self.offenders)
            ),
            *args, **kwargs
        )


class VspDomainException(ValueError, DataException):
    pass


class FeatureAssemblyException(DataException):
    def __init__(self, field, msg=None, *args, **kwargs):
        self.field = field
        super(FeatureAssemblyException, self).__init__(
            msg or "Missing or non-finite value for field: {0}".format(field), *args, **kwargs
        )


class SchemaMismatchException(DataException):
    pass


class EmptyDatasetException(DataException):
    pass
