"""
Unit conversion helpers.

All service code works in linear SI units; dB and dBm appear only at the
configuration boundary.
"""
import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_PER_HZ = -174.0


def db_to_linear(value_db):
    """Convert a power ratio in dB to linear scale."""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """Convert a linear power ratio to dB."""
    return 10.0 * np.log10(value)


def dbm_to_watts(value_dbm):
    """Convert a power in dBm to watts."""
    return np.power(10.0, (np.asarray(value_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(value_w):
    """Convert a power in watts to dBm."""
    return 10.0 * np.log10(value_w) + 30.0


def thermal_noise_dbm(bandwidth: float, noise_figure_db: float) -> float:
    """
    Thermal noise power over a bandwidth.

    Args:
        bandwidth: Bandwidth in Hz.
        noise_figure_db: Receiver noise figure in dB.

    Returns:
        Noise power in dBm.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bandwidth) + noise_figure_db


def thermal_noise_watts(bandwidth: float, noise_figure_db: float) -> float:
    """Thermal noise power over a bandwidth, in watts."""
    return float(dbm_to_watts(thermal_noise_dbm(bandwidth, noise_figure_db)))


def wrap_angle(angle):
    """Map angles to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)
