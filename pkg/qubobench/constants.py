# Problem defaults (three vacancy graphene supercell)
DEFAULT_KAPPA = 1.0
DEFAULT_N_VACANCIES = 3
DEFAULT_SUPERCELL_DIM = 3

# Guards
BRUTE_FORCE_MAX_VARS = 30
CONSTRAINED_MAX_COMBINATIONS = 10**8
STATEVECTOR_MAX_QUBITS = 22
ANNEAL_MAX_SPINS = 16
ANNEAL_STEPS_PER_TIME_UNIT = 10
# Default resolution, fine enough that halving the step moves the final state by < 1e-6
ANNEAL_DEFAULT_STEPS_PER_TIME_UNIT = 16
ANNEAL_MIN_DEFAULT_STEPS = 64
GRID_MAX_POINTS = 512

# Numerics
ENERGY_TOLERANCE = 1e-9
DRIFT_TOLERANCE = 1e-6
DRIFT_AUDIT_FLIPS = 10_000
NORM_TOLERANCE = 1e-8
ENUMERATION_CHUNK = 1 << 16
BRUTE_FORCE_BLOCK_BITS = 16
SA_RANDOM_BUFFER = 1 << 22

# Simulated annealing
SA_BETA_MIN = 0.1
SA_BETA_MAX = 10.0
SA_SWEEPS = 1000
SA_READS = 1000
SA_LAMBDA = 3.0

# Random sampling
RANDOM_SAMPLES = 1000
RANDOM_LAMBDA = 5.0

# VQE
VQE_SHOTS = 10_000
VQE_ALPHA = 0.4
VQE_TOL = 1.0
VQE_MAX_ITERS = 250
VQE_REPS = 1
VQE_LAMBDA = 3.0
VQE_RHOBEG = 1.0
VQE_OPTIMIZERS = ["cobyla", "nelder-mead"]
ANSATZ_KINDS = ["realamp", "qaoa"]

# Annealing simulator
ANNEAL_TIME = 20.0
ANNEAL_SHOTS = 1000
ANNEAL_LAMBDA = 1.0
ANNEAL_MAX_STEPS = 1 << 12
ANNEAL_TARGET_PS = 0.99

# Embedding
CHAIN_STRENGTH = 3.0
CHIMERA_SHORE = 4
MINOR_MAX_TRIES = 20
MINOR_MAX_ROUNDS = 24

# Harness
N_EXPERIMENTS = 10
DESIRED_PROBABILITY = 0.99
MAX_THREADS = 8

METHODS = ["brute", "random", "sa", "vqe", "anneal-sim", "embedded-sa"]
# Keys of a hyperparameter point that rebuild the instance instead of configuring the solver
INSTANCE_KEYS = ["supercell_dim", "kappa", "lambda", "n_vacancies"]

EXIT_GUARD = 2
EXIT_NO_EMBEDDING = 3
EXIT_CONFIG = 4

# Penalty coefficient of each method's tuned hyperparameter set
METHOD_LAMBDA = {
    "brute": SA_LAMBDA,
    "random": RANDOM_LAMBDA,
    "sa": SA_LAMBDA,
    "vqe": VQE_LAMBDA,
    "anneal-sim": ANNEAL_LAMBDA,
    "embedded-sa": ANNEAL_LAMBDA,
}
REFERENCE_BRUTE_MAX_VARS = 20
TT_EPSILON = 0.05
GRID_OBJECTIVES = ["max_mean_ps", "min_runtime"]
