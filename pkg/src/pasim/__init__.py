"""Shaped-QAM WDM transmission simulator.

Pipeline: sphere-shaped (or MB i.i.d.) amplitudes -> PAS 256-QAM mapping ->
RRC pulse shaping and WDM multiplexing -> split-step nonlinear fiber with
EDFA noise -> demultiplexing -> EDC or digital backpropagation -> carrier
phase recovery (blind phase search or mean rotation) -> GMI estimation.
"""

__version__ = "0.1.0"
