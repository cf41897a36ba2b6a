"""Modern Greek rhyme analysis, classification and verified generation."""
__version__ = "0.1.0"
