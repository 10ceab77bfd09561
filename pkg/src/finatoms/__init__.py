"""Two-time-scale co-movement clustering of daily price panels.

Pipeline: align price series (`ingest`), count same-sign daily moves per
stock pair (`comovement`), grow seeded complete-link clusters (`phc`),
extract and classify financial atoms (`atoms`), assemble molecules and
bond graphs (`molecules`).  `synth` generates planted markets with known
ground truth for verification, and `cli` ties everything together.
"""

__version__ = "0.1.0"
