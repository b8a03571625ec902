__cutoff__ = 1e-12  # eigenvalues at or below this are treated as zero (support/kernel)
__hermtol__ = 1e-12  # element-wise tolerance for Hermiticity
__tracetol__ = 1e-12  # unit-trace tolerance of density matrices
__probtol__ = 1e-10  # normalisation tolerance of probability vectors
__psdtol__ = 1e-12  # smallest admissible eigenvalue is -__psdtol__
__phasetol__ = 1e-12  # components below this are skipped when fixing eigenvector phases
__posfloor__ = 1e-14  # positivity safeguard of variational iterates
__gradtol__ = 1e-8  # variational stopping tolerance on the scaled gradient norm
__maxiter__ = 10000  # variational iteration cap
__anglegrid__ = 64  # coarse grid size of the j-angle search
__angletol__ = 1e-8  # bounded refinement tolerance of the j-angle search (radians)
__maxbrute__ = 6  # largest copy count accepted by the tensor-product oracle

# sequential detection and Monte Carlo
__chunkmin__ = 256  # first chunk drawn from an outcome stream
__chunkmax__ = 65536  # chunk sizes double up to this
__cap__ = 10**7  # default run-length cap in block steps
__batch__ = 50  # trials per parallel batch
