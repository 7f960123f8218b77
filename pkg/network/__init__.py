# Network package
# Contains the encoder-decoder segmentation network and its gradients
