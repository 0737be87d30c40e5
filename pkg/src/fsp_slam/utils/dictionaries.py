from typing import Any

import numpy as np


def to_builtins(inpt: Any) -> Any:
    """Convert numpy scalars and arrays in a datastructure to python builtins.
    Works on single values, lists, tuples, or dictionaries, nested or not.
    """
    if isinstance(inpt, dict):
        return {k: to_builtins(v) for k, v in inpt.items()}
    if isinstance(inpt, list | tuple):
        return [to_builtins(v) for v in inpt]
    if isinstance(inpt, np.ndarray):
        return inpt.tolist()
    if isinstance(inpt, np.generic):
        return inpt.item()
    return inpt
