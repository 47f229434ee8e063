"""
EDNN Counting
Weakly supervised multi-class counting and localization with extensive deep neural networks
"""
__version__ = "0.1.0"
