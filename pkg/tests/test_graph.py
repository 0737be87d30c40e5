import numpy as np
import pytest
from pytest import approx  # noqa: PT013

from fsp_slam.factor_graph.factors import BiasWalkFactor, FspReprojectionFactor
from fsp_slam.factor_graph.graph import FactorGraph
from fsp_slam.factor_graph.variables import VariableId, VariableKind, check_value
from fsp_slam.geometry.lie import Pose, Rotation
from fsp_slam.imu.preintegration import ImuBias
from fsp_slam.parameterization.fsp import FspRect
from fsp_slam.utils.exceptions import UnknownVariable

from .factories import random_bias, random_fhp, random_fsp


def test_variable_kinds():
    assert VariableKind.POSE.dim == 6
    assert VariableKind.FSP.dim == 8
    assert VariableKind.FHP.dim == 3
    assert VariableKind.BIAS.dim == 6
    assert VariableKind.FSP.is_landmark
    assert not VariableKind.BIAS.is_landmark
    assert str(VariableId(3, VariableKind.POSE)) == "pose#3"


def test_add_variables(rng):
    graph = FactorGraph()
    pose = graph.add_variable(VariableKind.POSE, Pose.identity())
    rect = graph.add_variable(VariableKind.FSP, random_fsp(rng))
    assert pose != rect
    assert graph.n_variables == 2
    assert graph.variables(VariableKind.FSP) == [rect]
    assert graph.dimension() == 14
    assert graph.dimension_by_kind() == {"pose": 6, "fsp": 8, "fhp": 0, "bias": 0}


def test_invalid_initial_value(rng):
    graph = FactorGraph()
    with pytest.raises(TypeError):
        graph.add_variable(VariableKind.POSE, ImuBias.zero())
    bad = random_fsp(rng).with_omega(-1.0)
    with pytest.raises(ValueError, match="Invalid initial value"):
        graph.add_variable(VariableKind.FSP, bad)
    with pytest.raises(ValueError, match="Invalid initial value"):
        check_value(VariableKind.FHP, random_fhp(rng).boxplus(np.array([0, 0, -10.0])))


def test_fix_and_free(rng):
    graph = FactorGraph()
    a = graph.add_variable(VariableKind.BIAS, random_bias(rng))
    b = graph.add_variable(VariableKind.BIAS, random_bias(rng))
    graph.fix_variable(a)
    assert graph.is_fixed(a)
    assert graph.free_variables() == [b]
    assert graph.dimension(free_only=True) == 6
    graph.unfix_variable(a)
    assert graph.free_variables() == [a, b]


def test_unknown_variable(K):
    graph = FactorGraph()
    ghost = VariableId(10, VariableKind.POSE)
    with pytest.raises(UnknownVariable):
        graph.value(ghost)
    with pytest.raises(UnknownVariable):
        graph.fix_variable(ghost)
    pose = graph.add_variable(VariableKind.POSE, Pose.identity())
    factor = FspReprojectionFactor(
        pose, pose, VariableId(11, VariableKind.FSP), np.zeros((4, 2)), K, np.eye(8)
    )
    with pytest.raises(UnknownVariable):
        graph.add_factor(factor)
    assert graph.n_factors == 0


def test_values_are_a_copy():
    graph = FactorGraph()
    var = graph.add_variable(VariableKind.BIAS, ImuBias.zero())
    values = graph.values
    values[var] = ImuBias(b_a=[1.0, 0.0, 0.0])
    assert graph.value(var).vector == approx(np.zeros(6))
    graph.update_values(values)
    assert graph.value(var).vector[0] == 1.0


def test_cost_reports_behind_camera(K):
    graph = FactorGraph()
    camera = graph.add_variable(VariableKind.POSE, Pose.identity())
    anchor = graph.add_variable(VariableKind.POSE, Pose.identity())
    rect = graph.add_variable(
        VariableKind.FSP,
        FspRect(
            ray=[0.0, 0.0],
            omega=0.5,
            w_bar=0.2,
            form_factor=1.0,
            rel_orientation=Rotation.identity(),
        ),
    )
    index = graph.add_factor(
        FspReprojectionFactor(camera, anchor, rect, np.zeros((4, 2)), K, np.eye(8))
    )
    b0 = graph.add_variable(VariableKind.BIAS, ImuBias.zero())
    b1 = graph.add_variable(VariableKind.BIAS, ImuBias(b_a=[0.1, 0.0, 0.0]))
    graph.add_factor(BiasWalkFactor((b0, b1), np.eye(6)))
    cost, invalid = graph.cost()
    assert invalid == []
    assert cost > 0
    # camera turned around: the rectangle is behind it
    graph.set_value(camera, Pose.identity().boxplus([0, 0, 0, 0, np.pi, 0]))
    cost, invalid = graph.cost()
    assert invalid == [index]
    assert cost == approx(0.01)
