"""
Antenna model family.

This module provides a factory returning the antenna model for a name and
a parameter set. Models are cached per (name, params).

Usage:
    from services.antenna import get_antenna_model

    model = get_antenna_model("ula", params)
    table = model.gain_table(angles, model.bs_codebook())
"""
from models.system import SystemParams
from .base import BaseAntennaModel
from .linear_array import LinearArrayAntennaModel
from .sector import SectorAntennaModel

_MODELS = {
    "sbp": SectorAntennaModel,
    "ula": LinearArrayAntennaModel,
}

_antenna_model_cache: dict[tuple[str, SystemParams], BaseAntennaModel] = {}


def get_antenna_model(name: str, params: SystemParams) -> BaseAntennaModel:
    """
    Get the antenna model for a name (cached).

    Args:
        name: "sbp" or "ula" (an AntennaKind value is accepted too).
        params: System parameters.

    Returns:
        Antenna model instance.

    Raises:
        ValueError: If the model name is unknown.
    """
    key_name = getattr(name, "value", name)
    if key_name not in _MODELS:
        raise ValueError(f"Unknown antenna model: {name}")

    key = (key_name, params)
    model = _antenna_model_cache.get(key)
    if model is None:
        if len(_antenna_model_cache) > 256:
            _antenna_model_cache.clear()
        model = _MODELS[key_name](params)
        _antenna_model_cache[key] = model
    return model


__all__ = [
    "BaseAntennaModel",
    "get_antenna_model",
    "SectorAntennaModel",
    "LinearArrayAntennaModel",
]
