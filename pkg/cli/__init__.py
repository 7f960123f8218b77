# CLI package
# Contains run configuration, training, evaluation and the crackseg commands
