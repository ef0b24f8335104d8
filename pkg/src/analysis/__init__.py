# Error bounds and downstream evaluation
