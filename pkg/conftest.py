"""Puts the repository root on sys.path so that `src` imports resolve"""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
