# Tests package for lordnet-lab
