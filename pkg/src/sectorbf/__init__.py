"""Data-independent angular-sector beamforming for microphone arrays."""

from .designer import (BeamformerBank, DesignConfig, DesignError, beam_response, build_grid,
                       design_bank, gram_matrix, solve_sector_weights, target_moment,
                       SectorTarget)
from .geometry import (AngularSector, ArrayGeometry, Direction, WaveContext, circular_array,
                       paper_sectors, steering_vector, unit_vector)
from .pipeline import MultichannelAudio, apply_bank, export_pattern
from .stft import SpectrogramTensor, StftConfig, stft_forward, stft_inverse

__version__ = "0.1.0"
