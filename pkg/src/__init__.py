# Weak-supervision spectral lab
