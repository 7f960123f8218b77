# Bayesian optimization package
# Contains Gaussian-process regression, expected improvement and the tuner
