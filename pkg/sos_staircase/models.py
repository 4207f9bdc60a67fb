from datetime import datetime, timezone
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field as PydField, field_validator, model_validator
from sqlmodel import Field, SQLModel

from sos_staircase.config import settings
from sos_staircase.core.poly import BiPoly, UniPoly
from sos_staircase.core.scalar import precision, unify


class FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


# --- 1. ПАРАМЕТРЫ РЕШАТЕЛЯ ---
class SolverParams(FrozenModel):
    precision: int = PydField(default=256, ge=53)
    gap_tol: float = 1e-25
    feas_tol: float = 1e-25
    max_iters: int = PydField(default=250, ge=1)
    step_fraction: float = 0.98

    @field_validator("gap_tol", "feas_tol")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value

    @field_validator("step_fraction")
    @classmethod
    def _fraction(cls, value: float) -> float:
        if not 0 < value < 1:
            raise ValueError("step_fraction must lie in (0, 1)")
        return value

    @classmethod
    def from_settings(cls, **overrides) -> "SolverParams":
        values: dict[str, Any] = {
            "precision": settings.PREC,
            "gap_tol": settings.GAP_TOL,
            "feas_tol": settings.FEAS_TOL,
            "max_iters": settings.MAX_ITERS,
            "step_fraction": settings.STEP_FRACTION,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_precision(self, bits: int) -> "SolverParams":
        return self.model_copy(update={"precision": bits})


# --- 2. SDP ---
Entry = tuple[int, int, Any]


def _upper(entries) -> tuple[Entry, ...]:
    merged: dict[tuple[int, int], Any] = {}
    for i, j, v in entries:
        key = (i, j) if i <= j else (j, i)
        if key in merged:
            a, b = unify(merged[key], v)
            merged[key] = a + b
        else:
            merged[key] = v
    return tuple((i, j, v) for (i, j), v in sorted(merged.items()) if v != 0)


class SdpBlock(FrozenModel):
    """
    Аффинный блок B(y) = F0 + Σ y_i F_i. Матрицы симметричны и хранятся
    верхним треугольником: (i, j, v) с i ≤ j означает F[i][j] = F[j][i] = v.
    """
    dim: int = PydField(ge=1)
    constant: tuple[Entry, ...] = ()
    coeffs: dict[int, tuple[Entry, ...]] = PydField(default_factory=dict)

    @model_validator(mode="after")
    def _check(self) -> "SdpBlock":
        object.__setattr__(self, "constant", _upper(self.constant))
        object.__setattr__(self, "coeffs", {k: _upper(v) for k, v in sorted(self.coeffs.items()) if _upper(v)})
        for entries in [self.constant, *self.coeffs.values()]:
            for i, j, _ in entries:
                if not (0 <= i < self.dim and 0 <= j < self.dim):
                    raise ValueError(f"entry ({i}, {j}) outside block of dimension {self.dim}")
        return self


class LinearEquality(FrozenModel):
    coeffs: dict[int, Any]
    rhs: Any = 0


class SdpProblem(FrozenModel):
    """min c·y  s.t.  B_k(y) ⪰ 0,  a·y = b."""
    num_vars: int = PydField(ge=1)
    objective: tuple[Any, ...]
    blocks: tuple[SdpBlock, ...]
    equalities: tuple[LinearEquality, ...] = ()
    labels: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "SdpProblem":
        if len(self.objective) != self.num_vars:
            raise ValueError("objective length must equal num_vars")
        if self.labels and len(self.labels) != self.num_vars:
            raise ValueError("labels length must equal num_vars")
        for block in self.blocks:
            if any(k >= self.num_vars or k < 0 for k in block.coeffs):
                raise ValueError("block references an unknown variable")
        for eq in self.equalities:
            if any(k >= self.num_vars or k < 0 for k in eq.coeffs):
                raise ValueError("equality references an unknown variable")
        return self


class SdpStatus(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    UNDECIDED = "Undecided"


class SdpSolution(FrozenModel):
    y: tuple[Any, ...]
    duals: tuple[Any, ...]          # mp.matrix на каждый блок
    eq_duals: tuple[Any, ...] = ()
    primal_obj: Any
    dual_obj: Any
    gap: Any
    status: SdpStatus
    iterations: int
    primal_residual: Any = 0
    dual_residual: Any = 0
    precision: int = 256
    ray: tuple[Any, ...] | None = None
    ray_margin: Any = None
    message: str = ""


class FeasibilityStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    UNDECIDED = "Undecided"


class FeasibilityResult(FrozenModel):
    status: FeasibilityStatus
    margin: Any = None
    y: tuple[Any, ...] = ()
    iterations: int = 0
    precision: int = 256


# --- 3. POP И РЕЛАКСАЦИИ ---
class Variant(str, Enum):
    UNIVARIATE4 = "Univariate4"
    BIVARIATE3 = "Bivariate3"


class Pop(FrozenModel):
    num_vars: int = PydField(ge=1, le=2)
    objective: Any
    inequalities: tuple[Any, ...] = ()
    equalities: tuple[Any, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "Pop":
        kind = UniPoly if self.num_vars == 1 else BiPoly
        for poly in (self.objective, *self.inequalities, *self.equalities):
            if not isinstance(poly, kind):
                raise ValueError(f"{self.num_vars}-variable POP expects {kind.__name__} polynomials")
        return self


class ParamPop(FrozenModel):
    epsilon: Any
    variant: Variant = Variant.UNIVARIATE4


class MomentRelaxation(FrozenModel):
    order: int = PydField(ge=1)
    pop: Pop
    sdp: SdpProblem
    moment_index: dict[tuple[int, ...], int]


# --- 4. СЕРТИФИКАТЫ ---
class GramCertificate(FrozenModel):
    """Полином z(x)ᵀ G z(x), z = (1, x, …, x^m)."""
    basis_degree: int = PydField(ge=0)
    gram: tuple[tuple[Any, ...], ...]

    @model_validator(mode="after")
    def _check(self) -> "GramCertificate":
        n = self.basis_degree + 1
        if len(self.gram) != n or any(len(row) != n for row in self.gram):
            raise ValueError(f"Gram matrix must be {n}x{n}")
        for i in range(n):
            for j in range(i):
                if self.gram[i][j] != self.gram[j][i]:
                    raise ValueError("Gram matrix must be symmetric")
        return self

    @property
    def size(self) -> int:
        return self.basis_degree + 1


class SosDecomposition(FrozenModel):
    """x − v = q + r·(1−x²) + s·(x + (1−ε)x²)."""
    v: Any
    q: GramCertificate
    r: GramCertificate
    s: GramCertificate
    epsilon: Any

    @property
    def order(self) -> int:
        return self.q.basis_degree


class ReducedDecomposition(FrozenModel):
    """x = q̃·x² + r̃·x²(1−x²) + s·(x + (1−ε)x²); r̃ отсутствует при d = 1."""
    q_tilde: GramCertificate
    r_tilde: GramCertificate | None
    s: GramCertificate
    epsilon: Any

    @property
    def order(self) -> int:
        return self.q_tilde.basis_degree + 1


class IneqStatus(str, Enum):
    HOLDS = "Holds"
    FAILS = "Fails"


class IneqResult(FrozenModel):
    status: IneqStatus
    margin: Any = None
    witness: Any = None
    value: Any = None


class LiftReport(FrozenModel):
    defect: Any
    multiplier: BiPoly
    terms: tuple[BiPoly, ...]


class CertificateCheck(FrozenModel):
    residual: Any
    min_gram_eig: Any


# --- 5. ЛЕСТНИЦА ---
class LoStatus(str, Enum):
    INFEASIBLE = "Infeasible"
    THEORETICAL_BOUND = "TheoreticalBound"


class Evidence(FrozenModel):
    lo_status: LoStatus
    hi_status: FeasibilityStatus = FeasibilityStatus.FEASIBLE
    precisions: tuple[int, ...] = ()
    probes: int = 0
    undecided_at: Any = None


class Enclosure(FrozenModel):
    lo: Any
    hi: Any
    evidence: Evidence

    @model_validator(mode="after")
    def _check(self) -> "Enclosure":
        lo, hi = unify(self.lo, self.hi)
        if lo > hi:
            raise ValueError("enclosure requires lo <= hi")
        return self

    @property
    def width(self) -> Any:
        lo, hi = unify(self.lo, self.hi)
        return hi - lo


class StaircasePoint(FrozenModel):
    d: int
    enclosure: Enclosure | None
    lower_bound: Any
    upper_bound: Any
    precision_bits: int = 0
    wall_time_ms: int = 0
    error: str | None = None

    @property
    def sandwich_ok(self) -> bool:
        if self.enclosure is None:
            return False
        with precision(max(self.precision_bits, 53)):
            lo, hi, lower, upper = unify(self.enclosure.lo, self.enclosure.hi, self.lower_bound, self.upper_bound)
            return lower <= hi and lo <= upper


class FarkasReport(FrozenModel):
    eta: Any
    u: tuple[Any, Any, Any]
    xi: Any
    determinant_term: Any
    first_block_min_eig: Any
    second_block_min_eig: Any
    u1_negative: bool
    passed: bool


# --- 6. ТАБЛИЦА КЭША ПОРОГОВ ---
class EnclosureRecord(SQLModel, table=True):
    """Кэш вычисленных порогов ε_d (decimal-строки на полной точности)."""
    id: int | None = Field(default=None, primary_key=True)
    d: int = Field(index=True)
    lo: str
    hi: str
    lo_status: str
    hi_status: str
    precision_bits: int
    wall_time_ms: int = Field(default=0)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
