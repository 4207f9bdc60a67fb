"""
Иерархия ошибок пакета.
Каждая ошибка несет `detail` (машиночитаемая причина) и `exit_code` для CLI,
по аналогии с status_code/detail у HTTP-исключений.
"""


class StaircaseError(Exception):
    exit_code: int = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


# --- 1. ВХОДНЫЕ ДАННЫЕ ---
class DomainError(StaircaseError):
    """Аргумент вне допустимого диапазона."""
    exit_code = 4


class ConfigError(StaircaseError):
    exit_code = 4


class OrderTooSmall(StaircaseError):
    """Порядок релаксации меньше ⌈deg g / 2⌉ для некоторого ограничения."""
    exit_code = 4


class DegreeOverflow(StaircaseError):
    exit_code = 4


# --- 2. ЧИСЛЕННЫЕ СБОИ ---
class NumericalBreakdown(StaircaseError):
    """Система Ньютона потеряла положительную определенность: нужно больше бит."""
    exit_code = 2


class SolverFailure(StaircaseError):
    """Решатель не вернул Optimal (Undecided/Infeasible)."""
    exit_code = 2

    def __init__(self, detail: str, status: str = "Undecided"):
        super().__init__(detail)
        self.status = status


class BracketFailure(StaircaseError):
    exit_code = 2


# --- 3. СЕРТИФИКАТЫ ---
class CertificateInfeasible(StaircaseError):
    exit_code = 3


class VerificationFailed(StaircaseError):
    exit_code = 3

    def __init__(self, detail: str, residual=None, min_gram_eig=None):
        super().__init__(detail)
        self.residual = residual
        self.min_gram_eig = min_gram_eig


class RoundingFailed(StaircaseError):
    exit_code = 3


class WitnessInvalid(StaircaseError):
    exit_code = 3
