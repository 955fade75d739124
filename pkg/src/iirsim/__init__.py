"""Intrusion-response simulator: network model to Bayesian attack graph to firewall rules,
driven by emulated banking-Trojan C&C traffic."""

__version__ = "0.1.0"
