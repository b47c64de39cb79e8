"""Synthetic data, training, evaluation and ablation at desk scale."""
