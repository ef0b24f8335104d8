# Label models, spectral embeddings and joint training
