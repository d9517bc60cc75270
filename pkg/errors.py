# errors.py

class CreditNetworkError(ValueError):
    """Base class for every error raised by the credit-network pipeline."""


class LedgerParseError(CreditNetworkError):
    def __init__(self, message: str, row: int = None, column: str = None, source: str = None):
        self.row = row
        self.column = column
        self.source = source
        location = []
        if source is not None:
            location.append(f"file {source}")
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class MixedCurrencyError(CreditNetworkError):
    pass


class NetworkConstructionError(CreditNetworkError):
    pass


class UnknownVertexError(CreditNetworkError):
    pass


class UndefinedMetricError(CreditNetworkError):
    pass


class PowerLawFitError(CreditNetworkError):
    pass


class ModularityError(CreditNetworkError):
    pass


class DiffusionError(CreditNetworkError):
    pass


class PanelError(CreditNetworkError):
    pass


class SynthConfigError(CreditNetworkError):
    pass
