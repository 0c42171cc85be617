"""
Uniform linear array antenna model.
"""
import numpy as np

from models.antenna import Codebook
from services import beamforming_service
from services.antenna.base import BaseAntennaModel


class LinearArrayAntennaModel(BaseAntennaModel):
    """
    Half-wavelength ULAs with m_bs and m_ue elements.

    Beam vectors are unit-norm, so gains are scaled by the array size to
    put a perfectly aligned beam at m_bs (or m_ue), the same scale as the
    sectorized mainlobe.
    """

    name = "ula"

    def bs_codebook(self) -> Codebook:
        return beamforming_service.make_codebook(self.params.m_bs, self.params.n_bs)

    def ue_codebook(self) -> Codebook:
        return beamforming_service.make_codebook(self.params.m_ue, self.params.n_ue)

    def wide_bs_codebook(self, beamwidth: float, active_elements: int) -> Codebook:
        n_beams = max(1, round(2.0 * np.pi / beamwidth))
        k = min(active_elements, self.params.m_bs)
        return beamforming_service.make_codebook(self.params.m_bs, n_beams, k)

    def gain_table(self, angles: np.ndarray, codebook: Codebook) -> np.ndarray:
        if codebook.is_sector:
            raise ValueError("LinearArrayAntennaModel needs a beam-vector codebook")
        elements = codebook.beams[0].size
        return elements * beamforming_service.codebook_response(codebook, angles)
