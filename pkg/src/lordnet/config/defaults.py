"""
Default constants shared by the solvers, samplers, optimizer and run configuration.
"""

# Conjugate gradient
CG_TOL = 1e-10
CG_MAX_ITER_FACTOR = 10

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# White noise for the random-field samplers
PRNG_NAME = "PCG64"

# Random-field covariance amplitude·(-Δ + shift·I)^(-exponent)
POISSON_FORCING = {"amplitude": 7.0 ** 1.5, "shift": 49.0, "exponent": 2.5}
NS_INITIAL_VORTICITY = {"amplitude": 8.0 ** 3, "shift": 64.0, "exponent": 4.0}

# Navier-Stokes
REYNOLDS = 1000.0
DT = 1e-2
LID_SPEED = 1.0
WARM_START_TRAIN = 1.98
WARM_START_TEST = 2.0
EVAL_STEPS_LIDDRIVEN = 2700
EVAL_STEPS_PERIODIC = 200

# Training divergence guard
DIVERGENCE_THRESHOLD = 1e6

# Dense-inverse and dense-weight guards
MAX_DENSE_INVERSE_N = 64
MAX_DENSE_ENTRIES = 50_000_000

# Timing
TIMING_REPETITIONS = 100

DEFAULT_OUTPUT_DIR = "runs"
OUTPUT_ENV_VAR = "LORDNET_OUT"
