# Metrics package
# Contains confusion counts, precision/recall/F1 and PR-curve scoring
