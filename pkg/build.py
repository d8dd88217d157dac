"""
Build script for PenScore
Creates a portable single-file executable using PyInstaller
"""
import logging
import os
import shutil
import subprocess
import sys
from pathlib import Path

logger = logging.getLogger("build")

SPEC_FILE = "PenScore.spec"
EXE_NAME = "PenScore.exe" if sys.platform == "win32" else "PenScore"


def clean_build_dirs():
    """Clean up previous build directories"""
    logger.info("Cleaning previous build directories...")
    for dir_name in ("build", "dist"):
        if os.path.exists(dir_name):
            shutil.rmtree(dir_name)
            logger.info(f"  Removed {dir_name}/")


def build_exe() -> bool:
    """Build the executable using PyInstaller"""
    logger.info(f"Building {EXE_NAME}... this may take a few minutes")

    try:
        subprocess.run(["pyinstaller", "--clean", SPEC_FILE], check=True, capture_output=False)
    except subprocess.CalledProcessError as e:
        logger.error(f"BUILD FAILED: {e}")
        return False
    except FileNotFoundError:
        logger.error("PyInstaller not found; install it with: pip install pyinstaller")
        return False

    target = Path("dist") / EXE_NAME
    logger.info("BUILD SUCCESSFUL")
    logger.info(f"  Location: {target}")
    if target.exists():
        logger.info(f"  Size: {target.stat().st_size / (1024 * 1024):.1f} MB")
    return True


def main():
    """Main build process"""
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    if not os.path.exists(SPEC_FILE):
        logger.error(f"{SPEC_FILE} not found; run this script from the project root directory")
        sys.exit(1)

    clean_build_dirs()
    sys.exit(0 if build_exe() else 1)


if __name__ == "__main__":
    main()
