from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping

from fsp_slam.factor_graph.factors import Factor
from fsp_slam.factor_graph.variables import (
    VariableId,
    VariableKind,
    VariableValue,
    check_value,
)
from fsp_slam.utils.exceptions import PointBehindCamera, UnknownVariable


class FactorGraph:
    """Variables with their current values, the subset held fixed and the
    factors connecting them.
    """

    def __init__(self):
        self._values: dict[VariableId, VariableValue] = {}
        self._fixed: set[VariableId] = set()
        self._factors: list[Factor] = []
        self._order: list[int] | None = None
        self._next_index = 0

    # Variables
    # ---------

    def add_variable(self, kind: VariableKind, initial_value: VariableValue) -> VariableId:
        check_value(kind, initial_value)
        var = VariableId(self._next_index, kind)
        self._next_index += 1
        self._values[var] = initial_value
        return var

    def _check_known(self, var: VariableId) -> None:
        if var not in self._values:
            raise UnknownVariable(var)

    def fix_variable(self, var: VariableId) -> None:
        """Exclude the variable from the optimization"""
        self._check_known(var)
        self._fixed.add(var)

    def unfix_variable(self, var: VariableId) -> None:
        self._check_known(var)
        self._fixed.discard(var)

    def is_fixed(self, var: VariableId) -> bool:
        self._check_known(var)
        return var in self._fixed

    def value(self, var: VariableId) -> VariableValue:
        self._check_known(var)
        return self._values[var]

    def set_value(self, var: VariableId, value: VariableValue) -> None:
        self._check_known(var)
        check_value(var.kind, value)
        self._values[var] = value

    def update_values(self, values: Mapping[VariableId, VariableValue]) -> None:
        for var, value in values.items():
            self.set_value(var, value)

    @property
    def values(self) -> dict[VariableId, VariableValue]:
        """Copy of the current values"""
        return dict(self._values)

    def variables(self, kind: VariableKind | None = None) -> list[VariableId]:
        return sorted(v for v in self._values if kind is None or v.kind == kind)

    def free_variables(self) -> list[VariableId]:
        return [v for v in self.variables() if v not in self._fixed]

    @property
    def n_variables(self) -> int:
        return len(self._values)

    def dimension(self, *, free_only: bool = False) -> int:
        """Sum of the manifold dimensions of the variables"""
        variables: Iterable[VariableId] = (
            self.free_variables() if free_only else self._values
        )
        return sum(v.kind.dim for v in variables)

    def dimension_by_kind(self) -> dict[str, int]:
        counts = Counter(v.kind for v in self._values)
        return {kind.value: counts[kind] * kind.dim for kind in VariableKind}

    # Factors
    # -------

    def add_factor(self, factor: Factor) -> int:
        """Returns the index of the factor.

        Raises:
            UnknownVariable: If the factor references a variable that is not
                part of the graph
        """
        for var in factor.variables:
            self._check_known(var)
        self._factors.append(factor)
        self._order = None
        return len(self._factors) - 1

    @property
    def factors(self) -> list[Factor]:
        return list(self._factors)

    def ordered_factors(self) -> list[tuple[int, Factor]]:
        """Factors with their indices, sorted by factor type and by the
        indices of the connected variables. Sums over this order do not depend
        on the order in which the factors were added.
        """
        if self._order is None:
            self._order = sorted(
                range(len(self._factors)),
                key=lambda i: (
                    type(self._factors[i]).__name__,
                    tuple(v.index for v in self._factors[i].variables),
                ),
            )
        return [(i, self._factors[i]) for i in self._order]

    @property
    def n_factors(self) -> int:
        return len(self._factors)

    def factor_values(
        self, factor: Factor, values: Mapping[VariableId, VariableValue] | None = None
    ) -> list[VariableValue]:
        values = self._values if values is None else values
        return [values[v] for v in factor.variables]

    def cost(
        self,
        values: Mapping[VariableId, VariableValue] | None = None,
        factors: Iterable[int] | None = None,
    ) -> tuple[float, list[int]]:
        """Total squared Mahalanobis cost. Factors whose prediction is behind a
        camera contribute zero.

        Args:
            values: Defaults to the current values
            factors: Indices of the factors to sum over, all by default

        Returns:
            Cost and sorted indices of the factors that could not be evaluated
        """
        subset = None if factors is None else set(factors)
        total = 0.0
        invalid = []
        for i, factor in self.ordered_factors():
            if subset is not None and i not in subset:
                continue
            try:
                total += factor.cost(self.factor_values(factor, values))
            except PointBehindCamera:
                invalid.append(i)
        return total, sorted(invalid)

    def __repr__(self) -> str:
        return (
            f"FactorGraph(variables={self.n_variables}, fixed={len(self._fixed)}, "
            f"factors={self.n_factors})"
        )
