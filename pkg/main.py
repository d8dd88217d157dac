"""
PenScore - penalized score tests for high-dimensional linear regression
Main entry point for the command-line application
"""
import sys

from src.cli.app import main


if __name__ == "__main__":
    sys.exit(main())
