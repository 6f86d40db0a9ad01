"""Stochastic-gradient twin support vector machines."""
