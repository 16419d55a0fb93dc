"""Online handwritten math recognition.

Strokes go in, LaTeX comes out.  The pipeline: resample and featurize ink,
run a bidirectional LSTM temporal classifier trained with CTC plus an
off-stroke constraint loss, read symbol segments and spatial relations off
the frame posteriors, then parse the resulting candidate lattice with a
probabilistic CYK parser over a two-dimensional grammar.
"""

__version__ = "0.1.0"
