"""
maxent-hmm: conditional maximum entropy models trained as tied-parameter HMMs
"""

__version__ = "0.1.0"
