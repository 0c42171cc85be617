"""
Sectorized beam pattern antenna model.
"""
import numpy as np

from models.antenna import Codebook
from services import beamforming_service
from services.antenna.base import BaseAntennaModel


class SectorAntennaModel(BaseAntennaModel):
    """
    Sectorized patterns: constant mainlobe, epsilon sidelobe at the BS and
    no sidelobe at the UE.
    """

    name = "sbp"

    def bs_codebook(self) -> Codebook:
        return beamforming_service.make_sector_codebook(self.params.n_bs, self.params.epsilon)

    def ue_codebook(self) -> Codebook:
        return beamforming_service.make_sector_codebook(self.params.n_ue, 0.0)

    def wide_bs_codebook(self, beamwidth: float, active_elements: int) -> Codebook:
        n_beams = max(1, round(2.0 * np.pi / beamwidth))
        return beamforming_service.make_sector_codebook(n_beams, self.params.epsilon, beamwidth)

    def gain_table(self, angles: np.ndarray, codebook: Codebook) -> np.ndarray:
        if not codebook.is_sector:
            raise ValueError("SectorAntennaModel needs a sector codebook")
        return beamforming_service.codebook_response(codebook, angles)
