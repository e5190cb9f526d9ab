"""Limit order book with patient and impatient traders: equilibrium waiting
times, a filtering PDE for the patient fraction, a price map, Monte Carlo
order flow and volume-at-price tools."""

__version__ = "0.1.0"
