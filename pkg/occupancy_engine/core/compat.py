"""
Compat
---------------------------
Single import surface for pydantic.
The models of the engine are written against the 1.x API, which pydantic 2.x still ships as `pydantic.v1`.
"""
# flake8: noqa: F401
import numpy as np

try:
    from pydantic.v1 import BaseModel, Extra, validate_arguments, validator
except ImportError:
    from pydantic import BaseModel, Extra, validate_arguments, validator


ARRAY_CONFIG = dict(arbitrary_types_allowed=True)
"""`validate_arguments` config for functions that take numpy arrays"""


class ArrayModel(BaseModel):
    """
    Base model for records that hold numpy arrays.
    Arrays are serialized to nested lists by `.json()`.
    """

    class Config:
        arbitrary_types_allowed = True
        extra = Extra.forbid
        json_encoders = {np.ndarray: lambda arr: arr.tolist(), np.integer: int, np.floating: float}
