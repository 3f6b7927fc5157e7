"""Equilibria of finite production economies with bads, negative prices and quotas."""
