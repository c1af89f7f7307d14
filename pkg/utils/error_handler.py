"""
Error handling utilities for the dimer EFP toolkit
"""

import logging
from typing import Dict, Union

from config.constants import EXIT_CODES, ErrorType

logger = logging.getLogger(__name__)


class DimerEfpError(Exception):
    """Base error; every message is qualified by the module that raised it."""

    error_type = ErrorType.SYSTEM_ERROR

    def __init__(self, module: str, message: str):
        self.module = module
        self.detail = message
        super().__init__(f"{module}: {message}")


class PreconditionError(DimerEfpError, ValueError):
    error_type = ErrorType.PRECONDITION_ERROR


class DomainError(DimerEfpError, ValueError):
    error_type = ErrorType.DOMAIN_ERROR


class CapacityError(DimerEfpError, RuntimeError):
    error_type = ErrorType.CAPACITY_ERROR


class ConvergenceError(DimerEfpError, RuntimeError):
    error_type = ErrorType.CONVERGENCE_ERROR


class ErrorHandler:
    """Map errors to exit codes, log them and suggest fixes"""

    EXIT_CODE_BY_TYPE = {
        ErrorType.PRECONDITION_ERROR: EXIT_CODES["PRECONDITION"],
        ErrorType.DOMAIN_ERROR: EXIT_CODES["PRECONDITION"],
        ErrorType.CAPACITY_ERROR: EXIT_CODES["CAPACITY"],
        ErrorType.CONVERGENCE_ERROR: EXIT_CODES["CONVERGENCE"],
        ErrorType.IO_ERROR: EXIT_CODES["GENERIC_ERROR"],
        ErrorType.SYSTEM_ERROR: EXIT_CODES["GENERIC_ERROR"],
    }

    ERROR_MESSAGES = {
        ErrorType.PRECONDITION_ERROR: {
            "user_message": "The requested parameters violate a precondition.",
            "suggestions": [
                "N must be even and at least 2n",
                "Chessboard checks need N divisible by 2^k * 2n",
                "Reference states need N divisible by ell and M even",
            ],
        },
        ErrorType.DOMAIN_ERROR: {
            "user_message": "A numeric argument is outside its domain.",
            "suggestions": [
                "The fugacity z must be strictly positive",
                "Decay exponents need strictly positive probabilities",
            ],
        },
        ErrorType.CAPACITY_ERROR: {
            "user_message": "The problem exceeds a configured capacity cap.",
            "suggestions": [
                "Raise --max-states, --max-configs or --max-dim",
                "Use a smaller lattice, or the transfer method instead of enumeration",
            ],
        },
        ErrorType.CONVERGENCE_ERROR: {
            "user_message": "An iterative solver failed to converge.",
            "suggestions": [
                "Use a shorter chain so the dense eigensolver applies",
                "Loosen the degeneracy tolerance",
            ],
        },
        ErrorType.IO_ERROR: {
            "user_message": "Reading or writing a file failed.",
            "suggestions": [
                "Check the path and file permissions",
                "Configurations use one U/D/L/R character per site, one row per line",
            ],
        },
    }

    @classmethod
    def classify_error(cls, error: BaseException) -> ErrorType:
        if isinstance(error, DimerEfpError):
            return error.error_type
        if isinstance(error, (OSError, UnicodeDecodeError)):
            return ErrorType.IO_ERROR
        return ErrorType.SYSTEM_ERROR

    @classmethod
    def handle_error(cls, error_type: ErrorType, error_message: str) -> None:
        """Log an error under its type name."""
        logger.error(f"{error_type.name}: {error_message}")

    @classmethod
    def exit_code(cls, error: BaseException) -> int:
        return cls.EXIT_CODE_BY_TYPE[cls.classify_error(error)]

    @classmethod
    def get_user_friendly_error(cls, error_type: Union[ErrorType, str], error_message: str) -> Dict[str, object]:
        """Get user-friendly error message and suggestions.

        Args:
            error_type: ErrorType, or a free-form string for unknown errors
            error_message: Original error message

        Returns:
            Dictionary containing user-friendly message and suggestions
        """
        error_info = cls.ERROR_MESSAGES.get(error_type) if isinstance(error_type, ErrorType) else None
        if not error_info:
            return {
                "user_message": f"An error occurred: {error_message}",
                "suggestions": ["Re-run with --log-level DEBUG for details"],
            }
        return {**error_info, "technical_details": error_message}

    @classmethod
    def format_error_for_display(cls, error: BaseException) -> str:
        """Format error information for the terminal"""
        error_type = cls.classify_error(error)
        info = cls.get_user_friendly_error(error_type, str(error))
        formatted = f"error: {error}\n"
        for suggestion in info["suggestions"]:
            formatted += f"  hint: {suggestion}\n"
        return formatted.rstrip("\n")
