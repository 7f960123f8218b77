# Priors package
# Contains per-position class priors and training class weights
