"""Encoder-decoder fusion network: layers, model, loss and training."""
