VERSION = "0.1.0"

# Basis defaults
DEFAULT_MAX_TOTAL_DEGREE = 5  # first 5-order power series
BASIS_KINDS = ["power_series", "indicator_saturated"]
DISCRETE_SUPPORT_THRESHOLD = 10  # treatment columns with <= this many levels count as discrete

# Ridge solver tolerances
EIGEN_RELATIVE_CUTOFF = 1e-12  # eigenvalues below this * max are treated as zero

# Penalty selection
PENALTY_RULES = ["fixed", "gcv_first_stages_plus_scaled_lambda0"]
GCV_LAMBDA_GRID = [10.0 ** (e / 2) for e in range(-16, 5)]  # 1e-8 .. 1e2, half decades
STANDARDIZE_DEFAULT = True

# Pi-hat assembly: rows processed per chunk when accumulating the PSMD moments
PI_CHUNK_ROWS = 2048

# Plotting grid
GRID_POINTS = 100
GRID_LOWER_QUANTILE = 0.10
GRID_UPPER_QUANTILE = 0.90
SCALED_EFFECT_FACTOR = 1.1
GRID_CURVES = ["asf", "casf_diagonal", "scaled_effect"]

# Bootstrap
BOOTSTRAP_DRAWS = 1000
BOOTSTRAP_LEVEL = 0.95
MAX_FAILED_DRAW_SHARE = 0.10  # more failed draws than this aborts the bootstrap
BOOTSTRAP_CAVEAT = (
    "Bootstrap standard errors and uniform bands are reported without a "
    "theoretical guarantee of asymptotic validity."
)

# Oracle tolerances
SOLVE_RESIDUAL_TOL = 1e-8  # gamma/phi solves
RANK_RELATIVE_CUTOFF = 1e-10  # completeness rank via singular values
SINGULAR_RELATIVE_CUTOFF = 1e-12  # singular values excluded from Picard sums
RANGE_RESIDUAL_TOL = 1e-10  # Picard range condition
WELLPOSEDNESS_SLACK = 1e-8
PMF_SUM_TOL = 1e-12
RANDOM_MODEL_FLOOR = 0.02  # minimum pmf entry in generated models

# Oracle acceptance battery
ORACLE_SUITE_MODELS = 100
ORACLE_SUITE_WELLPOSEDNESS_MODELS = 50
ORACLE_SUITE_GAMMA_DRAWS = 20
ORACLE_SUITE_NW_CHOICES = [2, 3]
ORACLE_SUITE_NX_CHOICES = [2, 3]

# Simulation defaults
DISCRETE_NOISE_SD = 1.0
MONTE_CARLO_N_LIST = [400, 1600, 6400]
MONTE_CARLO_REPS = 100
MONTE_CARLO_POINTS = [[1.0, -1.0]]  # (x1, x2) targets for the Gaussian design
SUMMARY_LOG_EVERY_REPS = 25  # log a progress line every N finished replications

# Environment variables
ENV_LOG_LEVEL = "PROXYCASF_LOG_LEVEL"
ENV_WORKERS = "PROXYCASF_WORKERS"

# Output
REPORT_FLOAT_FORMAT = "%.17g"
PLOT_COLUMNS = ["x", "estimate", "lo", "hi"]

# CLI exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3
COMMANDS = ["estimate", "panel-estimate", "simulate", "oracle-suite", "bands"]
