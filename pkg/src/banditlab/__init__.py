"""Bayesian bandit experimentation lab.

Daily-batch multi-armed bandit tooling for UX-style experiments: value
models robust to overdispersion, drift, and arm addition; a Thompson
sampling agent with optional stopping; posterior predictive model checks;
and counterfactual policy evaluation on logged data.
"""

__version__ = "0.1.0"
