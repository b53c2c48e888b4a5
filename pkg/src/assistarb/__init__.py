"""Uncertainty-driven arbitration of human assistance for stochastic policies.

Given sampled rollouts of a stochastic policy, estimate how much action
uncertainty would remain after each kind of human help (none, a discrete
choice, corrective control of a subspace, full teleoperation), penalize by
the amount of input each kind demands, and request the best one in real
time. Ships with a 2D serpentine benchmark, a ground-truth evaluation
harness, a variance-gated teleoperation baseline, and an interactive
playground service.
"""

__version__ = "0.1.0"
