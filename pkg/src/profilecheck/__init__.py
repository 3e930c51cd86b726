"""Fake-profile identification from publicly visible, static profile features.

Pipeline: min-max normalization, PCA-based feature selection, three
classifiers (Rprop neural network, SMO support vector machine, weighted
average profile index) and evaluation (TPR/TNR, McNemar, size sweeps).
"""

__version__ = "0.1.0"
