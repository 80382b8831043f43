"""Exception hierarchy shared by all modules."""


class MendelRiskError(Exception):
    """Base class for every error raised by the package."""

    code = "Error"


class MalformedInput(MendelRiskError, ValueError):
    code = "MalformedInput"


class MissingColumn(MendelRiskError, ValueError):
    code = "MissingColumn"


class OrphanAgeColumn(MendelRiskError, ValueError):
    code = "OrphanAgeColumn"


class UnknownTag(MendelRiskError, KeyError):
    code = "UnknownTag"

    def __str__(self):
        # KeyError quotes its message; keep it readable
        return str(self.args[0]) if self.args else self.code


class OutOfRangeAge(MendelRiskError, ValueError):
    code = "OutOfRangeAge"


class InvalidParing(MendelRiskError, ValueError):
    code = "InvalidParing"


class AllZeroMask(MendelRiskError, ValueError):
    code = "AllZeroMask"


class LoopDetected(MendelRiskError):
    code = "LoopDetected"


class InfeasiblePedigree(MendelRiskError):
    """The observed data has zero probability under the model."""

    code = "InfeasiblePedigree"


class TooLarge(MendelRiskError):
    code = "TooLarge"


class GridEmpty(MendelRiskError, ValueError):
    code = "GridEmpty"


class NoAgesAnywhere(MendelRiskError):
    code = "NoAgesAnywhere"


class PedigreeCheckError(MendelRiskError):
    """Raised when a CheckReport carries a fatal entry."""

    def __init__(self, report):
        self.report = report
        self.code = report.fatal["code"]
        super().__init__(f"{report.fatal['code']}: {report.fatal['message']}")
