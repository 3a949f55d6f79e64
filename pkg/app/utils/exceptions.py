from typing import Optional


class CaseParseException(Exception):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)

class CaseValidationException(Exception):
    pass

class UnknownCaseException(Exception):
    pass

class TopologyException(Exception):
    pass

class PowerFlowException(Exception):
    def __init__(self, message: str, island: Optional[list] = None):
        self.island = island or []
        if island:
            message = f"{message} (island buses: {island})"
        super().__init__(message)

class CascadeException(Exception):
    pass

class BudgetExceededException(Exception):
    pass

class ScenarioException(Exception):
    pass

class ConfigException(Exception):
    pass
