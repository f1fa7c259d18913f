"""
Command-line interface for dataset synthesis, training, dehazing, evaluation
and benchmarking.
"""

from .cli import build_parser, format_eval_row, main

__all__ = ['build_parser', 'format_eval_row', 'main']
