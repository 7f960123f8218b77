# Optimizers package
# Contains first-order update rules with persistent state
