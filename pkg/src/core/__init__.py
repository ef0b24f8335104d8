# Shared plumbing: configuration, errors, graphs, sweep state and orchestration
