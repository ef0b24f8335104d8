# File formats and plot data
