"""
Error types for the PDMP toolkit
Every error carries a machine-readable code and the CLI exit code it maps to
"""

import time

from . import config


class PdmpError(Exception):
    """Base class for toolkit errors"""

    error_code = 'INTERNAL_ERROR'
    exit_code = config.EXIT_INTERNAL_ERROR

    def __init__(self, message, details=None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_response(self):
        """Render the error envelope returned by every command handler"""
        return error_response(self.error_code, self.message, self.details)


class ConfigError(PdmpError):
    error_code = 'INVALID_CONFIG'
    exit_code = config.EXIT_INPUT_ERROR


class InputError(PdmpError):
    error_code = 'INVALID_INPUT'
    exit_code = config.EXIT_INPUT_ERROR


class DimensionMismatchError(PdmpError, ValueError):
    error_code = 'DIMENSION_MISMATCH'
    exit_code = config.EXIT_INPUT_ERROR


class DomainError(PdmpError, ValueError):
    """State lies outside the open state space E"""
    error_code = 'OUTSIDE_STATE_SPACE'
    exit_code = config.EXIT_SIMULATION_ERROR


class NumericalFlowError(PdmpError, ArithmeticError):
    error_code = 'NUMERICAL_FLOW_FAILURE'
    exit_code = config.EXIT_SIMULATION_ERROR


class SingularityError(NumericalFlowError):
    """Crack length reached omega/2 where the stress intensity factor blows up"""
    error_code = 'PARIS_SINGULARITY'


class ModelContractError(PdmpError):
    error_code = 'MODEL_CONTRACT_VIOLATION'
    exit_code = config.EXIT_SIMULATION_ERROR


class SimulationError(PdmpError):
    error_code = 'SIMULATION_FAILED'
    exit_code = config.EXIT_SIMULATION_ERROR

    def __init__(self, message, index=None, details=None):
        details = dict(details or {})
        if index is not None:
            details['index'] = index
        super().__init__(message, details)
        self.index = index


class UnregisteredQueryError(PdmpError, LookupError):
    error_code = 'UNREGISTERED_QUERY'
    exit_code = config.EXIT_ESTIMATION_IMPOSSIBLE


class EstimationError(PdmpError):
    error_code = 'ESTIMATION_FAILED'
    exit_code = config.EXIT_ESTIMATION_IMPOSSIBLE


class SelectionImpossibleError(EstimationError):
    """No data near the reverse curve, every criterion value is zero"""
    error_code = 'SELECTION_IMPOSSIBLE'


def error_response(error_code, message, details=None):
    """Build the status/error_code/message/details/timestamp envelope"""
    return {
        'status': 'error',
        'error_code': error_code,
        'message': message,
        'details': details or {},
        'timestamp': time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime()),
    }
