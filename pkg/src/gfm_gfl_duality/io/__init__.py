"""Input and output for gfm-gfl-duality.

This subpackage holds the file-facing pieces: JSON ingestion of network
topologies and scenarios (including the shipped data files), CSV tables of
loci, poles and traces, and SVG plots. The analysis modules never import from
here; the scenario runners and the command-line interface do.
"""
