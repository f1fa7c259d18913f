"""
Datasets

Synthetic hazy dataset generation from clean + depth pairs, the CSV
manifest with scene-level splits and checksums, lazy split loading, FMAP
float rasters and procedural desk-scale scenes.
"""

from .fmap import decode_fmap, encode_fmap, read_fmap, write_fmap
from .manifest import HazeDataset, load_dataset, read_manifest, write_manifest
from .records import SPLITS, HazeSample, SampleRecord
from .scenes import MAX_DEPTH, generate_scene, write_scenes
from .synthesis import (
    MANIFEST_NAME,
    DatasetSynthesizer,
    SynthesisSpec,
    assign_splits,
    find_pairs,
    load_depth,
    resynthesize,
    synthesize_dataset,
    synthesize_sample,
)

__all__ = [
    'MANIFEST_NAME',
    'MAX_DEPTH',
    'SPLITS',
    'DatasetSynthesizer',
    'HazeDataset',
    'HazeSample',
    'SampleRecord',
    'SynthesisSpec',
    'assign_splits',
    'decode_fmap',
    'encode_fmap',
    'find_pairs',
    'generate_scene',
    'load_dataset',
    'load_depth',
    'read_fmap',
    'read_manifest',
    'resynthesize',
    'synthesize_dataset',
    'synthesize_sample',
    'write_fmap',
    'write_manifest',
    'write_scenes',
]
