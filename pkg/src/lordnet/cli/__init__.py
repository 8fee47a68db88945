# CLI package for lordnet-lab
