"""Level sets, spectra and simulations for generalized Takagi functions."""
