from fsp_slam.utils.nomenclature import random_run_name
from fsp_slam.utils.nomenclature import variable_manager as vm


def test_variable_manager():
    assert vm["w_err_m"].label == "Width error [m]"
    assert vm["does_not_exist"].label == "does_not_exist"


def test_coolname():
    assert len(random_run_name(print=False)) >= 5
