"""
Сборка SDP из Gram-блоков одномерных SOS-множителей и уравнений сопоставления коэффициентов.
"""
from fractions import Fraction

from sos_staircase.core.poly import UniPoly
from sos_staircase.core.scalar import Scalar, unify
from sos_staircase.models import GramCertificate, LinearEquality, SdpBlock, SdpProblem


class GramSystem:
    """
    Переменные: верхние треугольники Gram-матриц. Gram размера n при множителе g·x^shift
    дает вклад G_ab·g_γ в коэффициент при x^(a+b+γ+shift) (внедиагональные элементы дважды).
    """

    def __init__(self, num_coeffs: int):
        self.num_coeffs = num_coeffs
        self.labels: list[str] = []
        self.blocks: list[SdpBlock] = []
        self.grams: dict[str, list[list[int]]] = {}
        self.rows: list[dict[int, Scalar]] = [{} for _ in range(num_coeffs)]
        self.rhs: list[Scalar] = [Fraction(0)] * num_coeffs
        self.extra: list[LinearEquality] = []

    def _contribute(self, k: int, var: int, value: Scalar) -> None:
        if not 0 <= k < self.num_coeffs:
            raise ValueError(f"coefficient x^{k} outside the system (degree < {self.num_coeffs})")
        slot = self.rows[k]
        if var in slot:
            a, b = unify(slot[var], value)
            slot[var] = a + b
        else:
            slot[var] = value

    def add_gram(self, name: str, size: int, multiplier: UniPoly | None = None, shift: int = 0) -> list[list[int]]:
        index = [[-1] * size for _ in range(size)]
        coeffs: dict[int, tuple] = {}
        for a in range(size):
            for b in range(a, size):
                var = len(self.labels)
                self.labels.append(f"{name}[{a},{b}]")
                index[a][b] = index[b][a] = var
                coeffs[var] = ((a, b, 1),)
                if multiplier is None:
                    continue
                weight = 1 if a == b else 2
                for gamma, g in enumerate(multiplier.coeffs):
                    if g != 0:
                        self._contribute(a + b + gamma + shift, var, g * weight)
        self.blocks.append(SdpBlock(dim=size, coeffs=coeffs))
        self.grams[name] = index
        return index

    def set_target(self, poly: UniPoly) -> None:
        if len(poly.coeffs) > self.num_coeffs:
            raise ValueError("target degree exceeds the system")
        for k, c in enumerate(poly.coeffs):
            self.rhs[k] = c

    def represent(self, name: str, poly: UniPoly) -> None:
        """Дополнительные уравнения: Gram `name` представляет заданный полином."""
        index = self.grams[name]
        size = len(index)
        for k in range(2 * size - 1):
            row: dict[int, Scalar] = {}
            for a in range(size):
                b = k - a
                if a <= b < size:
                    row[index[a][b]] = Fraction(1 if a == b else 2)
            self.extra.append(LinearEquality(coeffs=row, rhs=poly.coeff(k)))

    def problem(self, objective: dict[int, Scalar] | None = None) -> SdpProblem:
        c = [Fraction(0)] * len(self.labels)
        for var, value in (objective or {}).items():
            c[var] = value
        equalities = []
        for k, row in enumerate(self.rows):
            if not row:
                if self.rhs[k] != 0:
                    raise ValueError(f"coefficient x^{k} cannot be matched")
                continue
            equalities.append(LinearEquality(coeffs=row, rhs=self.rhs[k]))
        equalities += self.extra
        return SdpProblem(
            num_vars=len(self.labels),
            objective=tuple(unify(*c)),
            blocks=tuple(self.blocks),
            equalities=tuple(equalities),
            labels=tuple(self.labels),
        )

    def gram(self, name: str, y) -> GramCertificate:
        index = self.grams[name]
        size = len(index)
        return GramCertificate(
            basis_degree=size - 1,
            gram=tuple(tuple(y[index[a][b]] for b in range(size)) for a in range(size)),
        )
