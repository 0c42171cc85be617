"""
Base antenna model interface.

This module defines the interface shared by the sectorized-pattern and
ULA antenna models used by the simulator.
"""
from abc import ABC, abstractmethod

import numpy as np

from models.antenna import Codebook
from models.system import SystemParams


class BaseAntennaModel(ABC):
    """
    Abstract base class for antenna models.

    A model builds the BS and UE cell-search codebooks and turns departure
    or arrival angles into gain tables (angle x beam) that already include
    the array gain.
    """

    name: str = ""

    def __init__(self, params: SystemParams):
        """
        Initialize the model.

        Args:
            params: System parameters (beam counts, array sizes, sidelobe gain).
        """
        self.params = params

    @abstractmethod
    def bs_codebook(self) -> Codebook:
        """
        Narrow BS codebook with n_bs beams.

        Returns:
            Codebook used for random beamforming and exhaustive search.
        """
        pass

    @abstractmethod
    def ue_codebook(self) -> Codebook:
        """
        UE codebook with n_ue beams.

        Returns:
            Codebook of UE receive beams.
        """
        pass

    @abstractmethod
    def wide_bs_codebook(self, beamwidth: float, active_elements: int) -> Codebook:
        """
        Wide BS codebook for the first stage of iterative search.

        Args:
            beamwidth: Target beamwidth in rad.
            active_elements: Active elements per beam for array models.

        Returns:
            Codebook with round(2pi / beamwidth) beams.
        """
        pass

    @abstractmethod
    def gain_table(self, angles: np.ndarray, codebook: Codebook) -> np.ndarray:
        """
        Gain of every beam towards every angle.

        Args:
            angles: Departure (BS side) or arrival (UE side) angles in rad.
            codebook: Codebook built by this model.

        Returns:
            Array of shape (len(angles), len(codebook)).
        """
        pass
