"""Dysarthric-speech data augmentation toolkit.

Speed/tempo perturbation, two-stage prosodic style transfer toward
dysarthric target profiles, prosodic features, severity-stratified CER and
a boosted-tree dysarthria classifier.
"""

from .audio import AudioBuffer, read_wav, resample, write_wav
from .augment import build_plan, ratio_grid, speed_perturb, tempo_perturb
from .prosody import ProsodyProfile, energy_contour, estimate_f0, extract_profile
from .transfer import build_target_pool, convert, convert_prosody, convert_speaker, pair_sources

__version__ = "0.1.0"
