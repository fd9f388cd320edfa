"""Distances between filtering distributions: the random-measure metric d, the weighted TV metric d_g and the Gaussian mismatch epsilon."""
