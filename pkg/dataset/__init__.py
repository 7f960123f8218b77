# Dataset package
# Contains image/mask codecs, corpus loading, splits and synthetic crack generation
